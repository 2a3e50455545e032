//! Reference solutions: exact line-wise matrix exponentials or tight adaptive runs, with a file cache.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, SymmetricEigen};
use sha2::{Digest, Sha256};

use super::{BenchProblem, SAMPLE_COUNT};
use crate::error::{Error, Result};
use crate::problem::DENSE_GUARD;
use crate::state::{LayoutKind, NormKind, ToleranceSpec};
use crate::timeloop::{advance_adaptive, uniform_sample_times, Method, SolverConfig};

/// Relative tolerance of integrated references.
pub const REFERENCE_RTOL: f64 = 1e-12;
/// Absolute tolerance of integrated references, below every benchmark solution value.
const REFERENCE_ATOL: f64 = 1e-14;

const MAGIC: &str = "STSREF";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    /// `exp(t A)` of the single-line operator, applied to every `x` line.
    MatrixExponential,
    /// Adaptive RKL run with the cell norm at this relative tolerance.
    Integration { rtol: f64 },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::MatrixExponential => f.write_str("expm"),
            Provenance::Integration { rtol } => write!(f, "rkl:{rtol:e}"),
        }
    }
}

impl Provenance {
    fn parse(s: &str) -> Result<Self> {
        if s == "expm" {
            return Ok(Provenance::MatrixExponential);
        }
        s.strip_prefix("rkl:")
            .and_then(|r| r.parse().ok())
            .map(|rtol| Provenance::Integration { rtol })
            .ok_or_else(|| Error::Config(format!("unknown provenance '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub fingerprint: String,
    pub kind: LayoutKind,
    pub n_v: usize,
    pub n_x: usize,
    pub provenance: Provenance,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
}

/// Hash of everything that determines the exact solution: operator, grid, initial data and sample times.
pub fn reference_fingerprint(problem: &BenchProblem, tf: f64) -> String {
    let l = problem.layout();
    let nu = match problem {
        BenchProblem::Fd(p) => p.nu(),
        BenchProblem::Dg(p) => p.nu(),
    };
    let text = format!(
        "v{FORMAT_VERSION};kind={:?};nu={:016x};nv={};nx={};tf={:016x};samples={SAMPLE_COUNT};{}",
        l.kind(),
        nu.to_bits(),
        l.n_v(),
        l.n_x(),
        tf.to_bits(),
        problem.discretization_tag()
    );
    hex::encode(&Sha256::digest(text.as_bytes())[..16])
}

/// Exact solution at `times` from the eigendecomposition of the symmetric line operator.
pub fn expm_reference(problem: &BenchProblem, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let layout = problem.layout();
    let a = problem.line_matrix()?;
    let scale = a.amax();
    let asym = (&a - a.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!("line operator is not symmetric (defect {asym:e})")));
    }
    let eig = SymmetricEigen::new(a);
    let q = &eig.eigenvectors;
    let m = layout.n_v() * layout.n_b();
    let n_x = layout.n_x();
    let u0 = problem.initial_condition();
    // columns are x lines
    let lines = DMatrix::from_fn(m, n_x, |r, k| u0[k * m + r]);
    let coeffs = q.transpose() * lines;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut c = coeffs.clone();
        for (j, lam) in eig.eigenvalues.iter().enumerate() {
            let g = (lam * t).exp();
            c.row_mut(j).scale_mut(g);
        }
        let u = q * c;
        let mut snap = vec![0.0; layout.len()];
        for k in 0..n_x {
            for r in 0..m {
                snap[k * m + r] = u[(r, k)];
            }
        }
        out.push(snap);
    }
    Ok(out)
}

/// Tight-tolerance RKL integration to `times`.
pub fn integrated_reference(problem: &BenchProblem, times: &[f64], rtol: f64) -> Result<Vec<Vec<f64>>> {
    let mut cfg = SolverConfig::new(Method::Rkl, ToleranceSpec::new(rtol, REFERENCE_ATOL)?);
    cfg.norm = NormKind::Cell;
    let out = advance_adaptive(problem.rhs(), &problem.initial_condition(), times, &cfg)?.into_result()?;
    Ok(out.samples)
}

/// Matrix exponential when the line operator fits the dense guard, otherwise an integrated run.
pub fn compute_reference(problem: &BenchProblem, tf: f64) -> Result<ReferenceSolution> {
    let layout = problem.layout();
    let times = uniform_sample_times(tf, SAMPLE_COUNT);
    let line = layout.n_v() * layout.n_b();
    let (provenance, snapshots) = if line <= DENSE_GUARD {
        (Provenance::MatrixExponential, expm_reference(problem, &times)?)
    } else {
        (Provenance::Integration { rtol: REFERENCE_RTOL }, integrated_reference(problem, &times, REFERENCE_RTOL)?)
    };
    Ok(ReferenceSolution {
        fingerprint: reference_fingerprint(problem, tf),
        kind: layout.kind(),
        n_v: layout.n_v(),
        n_x: layout.n_x(),
        provenance,
        times,
        snapshots,
    })
}

fn kind_name(k: LayoutKind) -> &'static str {
    match k {
        LayoutKind::Fd => "fd",
        LayoutKind::Dg => "dg",
    }
}

/// One text header line, then little-endian `f64` times followed by the snapshots.
pub fn write_reference<W: Write>(mut w: W, r: &ReferenceSolution) -> Result<()> {
    let n_b = if r.kind == LayoutKind::Dg { 4 } else { 1 };
    writeln!(
        w,
        "{MAGIC} version={FORMAT_VERSION} endian=little kind={} nv={} nx={} nb={n_b} samples={} provenance={} fingerprint={}",
        kind_name(r.kind),
        r.n_v,
        r.n_x,
        r.times.len(),
        r.provenance,
        r.fingerprint
    )?;
    for x in r.times.iter().chain(r.snapshots.iter().flatten()) {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cache file, checking it was produced for `expected_fingerprint` when given.
pub fn read_reference<R: Read>(r: R, expected_fingerprint: Option<&str>) -> Result<ReferenceSolution> {
    let mut r = BufReader::new(r);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(MAGIC) {
        return Err(Error::Config("not a reference file".into()));
    }
    let map: HashMap<&str, &str> = fields.filter_map(|f| f.split_once('=')).collect();
    let get = |k: &str| map.get(k).copied().ok_or_else(|| Error::Config(format!("reference header lacks '{k}'")));
    let num =
        |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::Config(format!("bad header field '{k}'"))) };
    if num("version")? != FORMAT_VERSION as usize {
        return Err(Error::Config(format!("unsupported reference version {}", get("version")?)));
    }
    if get("endian")? != "little" {
        return Err(Error::Config("unsupported byte order".into()));
    }
    let kind = match get("kind")? {
        "fd" => LayoutKind::Fd,
        "dg" => LayoutKind::Dg,
        other => return Err(Error::Config(format!("unknown layout kind '{other}'"))),
    };
    let (n_v, n_x, n_b, samples) = (num("nv")?, num("nx")?, num("nb")?, num("samples")?);
    let fingerprint = get("fingerprint")?.to_string();
    if let Some(fp) = expected_fingerprint {
        if fp != fingerprint {
            return Err(Error::Config(format!("reference fingerprint {fingerprint} does not match {fp}")));
        }
    }
    let provenance = Provenance::parse(get("provenance")?)?;
    let n = n_v * n_x * n_b;
    let mut buf = vec![0u8; 8 * samples * (n + 1)];
    r.read_exact(&mut buf)?;
    let vals: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (times, data) = vals.split_at(samples);
    Ok(ReferenceSolution {
        fingerprint,
        kind,
        n_v,
        n_x,
        provenance,
        times: times.to_vec(),
        snapshots: data.chunks_exact(n).map(<[f64]>::to_vec).collect(),
    })
}

/// In-memory memo of references keyed by fingerprint, optionally backed by a cache directory.
#[derive(Debug, Default)]
pub struct ReferenceStore {
    dir: Option<PathBuf>,
    memo: Mutex<HashMap<String, Arc<ReferenceSolution>>>,
}

impl ReferenceStore {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir, memo: Mutex::default() }
    }

    pub fn path_for(&self, fingerprint: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("ref-{fingerprint}.bin")))
    }

    /// Memo, then cache file, then a fresh computation written back to the cache.
    pub fn get(&self, problem: &BenchProblem, tf: f64) -> Result<Arc<ReferenceSolution>> {
        let fp = reference_fingerprint(problem, tf);
        if let Some(r) = self.memo.lock().unwrap().get(&fp) {
            return Ok(r.clone());
        }
        let path = self.path_for(&fp);
        let cached = path
            .as_deref()
            .filter(|p| p.exists())
            .and_then(|p| std::fs::File::open(p).ok())
            .and_then(|f| read_reference(f, Some(&fp)).ok());
        let r = match cached {
            Some(r) => r,
            None => {
                let r = compute_reference(problem, tf)?;
                if let Some(p) = &path {
                    write_cache(p, &r)?;
                }
                r
            }
        };
        let r = Arc::new(r);
        self.memo.lock().unwrap().insert(fp, r.clone());
        Ok(r)
    }
}

fn write_cache(path: &Path, r: &ReferenceSolution) -> Result<()> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d)?;
    }
    // write then rename so concurrent readers never see a partial file
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    write_reference(std::io::BufWriter::new(std::fs::File::create(&tmp)?), r)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::ProblemKind;

    #[test]
    fn fingerprint_ignores_solver_settings_only_by_construction() {
        let a = BenchProblem::new(ProblemKind::Fd, 1.0, 16, 2).unwrap();
        let fp = reference_fingerprint(&a, 1.0);
        assert_eq!(fp, reference_fingerprint(&BenchProblem::new(ProblemKind::Fd, 1.0, 16, 2).unwrap(), 1.0));
        for other in [
            BenchProblem::new(ProblemKind::Fd, 0.1, 16, 2).unwrap(),
            BenchProblem::new(ProblemKind::Fd, 1.0, 32, 2).unwrap(),
            BenchProblem::new(ProblemKind::Fd, 1.0, 16, 3).unwrap(),
            BenchProblem::new(ProblemKind::Dg, 1.0, 16, 2).unwrap(),
        ] {
            assert_ne!(fp, reference_fingerprint(&other, 1.0));
        }
        assert_ne!(fp, reference_fingerprint(&a, 0.5));
    }

    #[test]
    fn round_trip_and_rejection() {
        let p = BenchProblem::new(ProblemKind::Dg, 1.0, 6, 2).unwrap();
        let r = compute_reference(&p, 0.3).unwrap();
        assert_eq!(r.provenance, Provenance::MatrixExponential);
        let mut buf = vec![];
        write_reference(&mut buf, &r).unwrap();
        let back = read_reference(&buf[..], Some(&r.fingerprint)).unwrap();
        assert_eq!(back, r);
        assert!(read_reference(&buf[..], Some("deadbeef")).is_err());
        assert!(read_reference(&b"junk\n"[..], None).is_err());
        assert!(read_reference(&buf[..buf.len() - 3], None).is_err());
    }

    #[test]
    fn store_uses_cache_dir() {
        let dir = tempfile::tempdir().unwrap();
        let p = BenchProblem::new(ProblemKind::Fd, 1.0, 8, 2).unwrap();
        let s = ReferenceStore::new(Some(dir.path().to_path_buf()));
        let r = s.get(&p, 0.5).unwrap();
        let path = s.path_for(&r.fingerprint).unwrap();
        assert!(path.exists());
        let fresh = ReferenceStore::new(Some(dir.path().to_path_buf()));
        assert_eq!(*fresh.get(&p, 0.5).unwrap(), *r);
    }
}
