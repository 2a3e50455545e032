//! Benchmark harness: experiment configs, reference solutions, error metrics and CSV rows.

mod reference;
mod study;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::domeig::{EigSafety, PowerIterConfig};
use crate::error::{Error, Result};
use crate::problem::{DgProblem, FdProblem, Rhs};
use crate::state::{max_abs, GridLayout, NormKind, ToleranceSpec};
use crate::timeloop::{
    advance_adaptive, advance_fixed, uniform_sample_times, EigMode, Method, RunOutput, SolverConfig,
};

pub use reference::{
    compute_reference, expm_reference, integrated_reference, read_reference, reference_fingerprint, write_reference,
    Provenance, ReferenceSolution, ReferenceStore, REFERENCE_RTOL,
};
pub use study::{run_study, study_configs, Study, NUS};

/// Number of evenly spaced output times `k t_f / 20`.
pub const SAMPLE_COUNT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Fd,
    Dg,
}

impl ProblemKind {
    /// Default grid `(n_v, n_x)` of the benchmark configuration.
    pub fn default_grid(self) -> (usize, usize) {
        match self {
            ProblemKind::Fd => (64, 64),
            ProblemKind::Dg => (120, 20),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ProblemKind::Fd => "fd",
            ProblemKind::Dg => "dg",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd" => Ok(ProblemKind::Fd),
            "dg" => Ok(ProblemKind::Dg),
            other => Err(Error::Config(format!("unknown problem '{other}'"))),
        }
    }
}

/// Either discretization of the diffusion benchmark.
#[derive(Debug, Clone)]
pub enum BenchProblem {
    Fd(FdProblem),
    Dg(DgProblem),
}

impl BenchProblem {
    pub fn new(kind: ProblemKind, nu: f64, n_v: usize, n_x: usize) -> Result<Self> {
        Ok(match kind {
            ProblemKind::Fd => BenchProblem::Fd(FdProblem::new(GridLayout::fd(n_v, n_x)?, nu)?),
            ProblemKind::Dg => BenchProblem::Dg(DgProblem::new(GridLayout::dg(n_v, n_x)?, nu)?),
        })
    }

    pub fn rhs(&self) -> &dyn Rhs {
        match self {
            BenchProblem::Fd(p) => p,
            BenchProblem::Dg(p) => p,
        }
    }

    pub fn layout(&self) -> GridLayout {
        *self.rhs().layout()
    }

    pub fn initial_condition(&self) -> Vec<f64> {
        match self {
            BenchProblem::Fd(p) => p.initial_condition().into_values(),
            BenchProblem::Dg(p) => p.initial_condition().into_values(),
        }
    }

    pub fn mass(&self, u: &[f64]) -> f64 {
        match self {
            BenchProblem::Fd(p) => p.mass(u),
            BenchProblem::Dg(p) => p.mass(u),
        }
    }

    pub fn lambda_user(&self) -> f64 {
        match self {
            BenchProblem::Fd(p) => p.lambda_user(),
            BenchProblem::Dg(p) => p.lambda_user(),
        }
    }

    /// Dense operator of one `x` line; every line evolves under this same matrix.
    pub fn line_matrix(&self) -> Result<DMatrix<f64>> {
        match self {
            BenchProblem::Fd(p) => p.single_line().assemble_matrix(),
            BenchProblem::Dg(p) => p.single_line().assemble_matrix(),
        }
    }

    /// Settings beyond `(kind, nu, grid)` that change the discrete operator.
    fn discretization_tag(&self) -> String {
        match self {
            BenchProblem::Fd(_) => "fd-flux".into(),
            BenchProblem::Dg(p) => format!("sipg-c{:016x}-q{}", p.penalty_c().to_bits(), p.quad_order()),
        }
    }
}

/// One benchmark experiment; a list of tolerances or fixed steps yields one row each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub method: Method,
    pub nu: f64,
    pub nv: usize,
    pub nx: usize,
    pub rtol: Vec<f64>,
    pub atol: f64,
    pub norm: NormKind,
    pub eig_mode: EigMode,
    pub q_lambda: f64,
    pub tau: f64,
    pub tf: f64,
    /// Non-empty switches to fixed-step runs; `rtol[0]` then only scales difference quotients.
    pub fixed_h: Vec<f64>,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        PartialConfig::default().resolve().expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.method.is_implicit() && self.problem != ProblemKind::Fd {
            return bad(format!("{} needs problem = fd", self.method));
        }
        if self.nv == 0 || self.nx == 0 {
            return bad(format!("grid must be positive, got {}x{}", self.nv, self.nx));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad(format!("nu must be > 0, got {}", self.nu));
        }
        if self.rtol.is_empty() {
            return bad("need at least one rtol".into());
        }
        for &r in &self.rtol {
            ToleranceSpec::new(r, self.atol).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.fixed_h.iter().any(|h| !(*h > 0.0)) {
            return bad("fixed-h values must be > 0".into());
        }
        if !(self.tf > 0.0 && self.tf.is_finite()) {
            return bad(format!("tf must be > 0, got {}", self.tf));
        }
        if !(self.q_lambda > 0.0) {
            return bad(format!("q-lambda must be > 0, got {}", self.q_lambda));
        }
        PowerIterConfig { tau: self.tau, ..Default::default() }.validate()?;
        Ok(())
    }

    pub fn build_problem(&self) -> Result<BenchProblem> {
        BenchProblem::new(self.problem, self.nu, self.nv, self.nx)
    }

    pub fn sample_times(&self) -> Vec<f64> {
        uniform_sample_times(self.tf, SAMPLE_COUNT)
    }

    pub fn solver_config(&self, rtol: f64) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(self.method, ToleranceSpec::new(rtol, self.atol)?);
        cfg.norm = self.norm;
        cfg.eig.mode = self.eig_mode;
        cfg.eig.safety = EigSafety::new(self.q_lambda)?;
        cfg.eig.power.tau = self.tau;
        cfg.eig.power.seed = self.seed;
        cfg.newton.norm = self.norm;
        Ok(cfg)
    }

    /// Hash of every field that can change a result row.
    pub fn fingerprint(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }

    /// Warnings worth printing before a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = vec![];
        if self.method.is_sts() && self.eig_mode == EigMode::Power {
            if let Some(msg) = (EigSafety { q_lambda: self.q_lambda }).warning(self.tau) {
                w.push(msg);
            }
        }
        w
    }
}

/// Scalar or list, so config files may write `rtol = 1e-4` or `rtol = [1e-2, 1e-4]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Parses `1e-2,1e-3` style lists used on the command line.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number '{p}': {e}")))).collect()
}

/// Config with every field optional; the file keys equal the long flag names.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PartialConfig {
    pub problem: Option<ProblemKind>,
    pub method: Option<Method>,
    pub nu: Option<f64>,
    pub nv: Option<usize>,
    pub nx: Option<usize>,
    pub rtol: Option<OneOrMany>,
    pub atol: Option<f64>,
    pub norm: Option<NormKind>,
    pub eig_mode: Option<EigMode>,
    pub q_lambda: Option<f64>,
    pub tau: Option<f64>,
    pub tf: Option<f64>,
    pub fixed_h: Option<OneOrMany>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

/// Keys accepted in config files, in flag order.
pub const CONFIG_KEYS: [&str; 17] = [
    "problem",
    "method",
    "nu",
    "nv",
    "nx",
    "rtol",
    "atol",
    "norm",
    "eig-mode",
    "q-lambda",
    "tau",
    "tf",
    "fixed-h",
    "seed",
    "out",
    "cache-dir",
    "jobs",
];

impl PartialConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            problem: over.problem.or(self.problem),
            method: over.method.or(self.method),
            nu: over.nu.or(self.nu),
            nv: over.nv.or(self.nv),
            nx: over.nx.or(self.nx),
            rtol: over.rtol.or(self.rtol),
            atol: over.atol.or(self.atol),
            norm: over.norm.or(self.norm),
            eig_mode: over.eig_mode.or(self.eig_mode),
            q_lambda: over.q_lambda.or(self.q_lambda),
            tau: over.tau.or(self.tau),
            tf: over.tf.or(self.tf),
            fixed_h: over.fixed_h.or(self.fixed_h),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            cache_dir: over.cache_dir.or(self.cache_dir),
            jobs: over.jobs.or(self.jobs),
        }
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let problem = self.problem.unwrap_or(ProblemKind::Dg);
        let (nv, nx) = problem.default_grid();
        let cfg = ExperimentConfig {
            problem,
            method: self.method.unwrap_or(Method::Rkl),
            nu: self.nu.unwrap_or(1.0),
            nv: self.nv.unwrap_or(nv),
            nx: self.nx.unwrap_or(nx),
            rtol: self.rtol.map(OneOrMany::into_vec).unwrap_or_else(|| vec![1e-4]),
            atol: self.atol.unwrap_or(1e-11),
            norm: self.norm.unwrap_or_default(),
            eig_mode: self.eig_mode.unwrap_or_default(),
            q_lambda: self.q_lambda.unwrap_or(1.1),
            tau: self.tau.unwrap_or(0.1),
            tf: self.tf.unwrap_or(1.0),
            fixed_h: self.fixed_h.map(OneOrMany::into_vec).unwrap_or_default(),
            seed: self.seed.unwrap_or(0),
            out: self.out,
            cache_dir: self.cache_dir,
            jobs: self.jobs.unwrap_or(1).max(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `(linf20, maxmax)`: worst relative max-norm error over the samples, and worst absolute error.
pub fn error_metrics(samples: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<(f64, f64)> {
    if samples.len() != reference.len() {
        return Err(Error::LayoutMismatch(format!("{} samples vs {} reference times", samples.len(), reference.len())));
    }
    let mut linf = 0.0f64;
    let mut maxmax = 0.0f64;
    for (u, r) in samples.iter().zip(reference) {
        if u.len() != r.len() {
            return Err(Error::LayoutMismatch(format!("sample has {} entries, reference {}", u.len(), r.len())));
        }
        let scale = max_abs(r);
        if scale == 0.0 {
            return Err(Error::InvalidArgument("reference snapshot is identically zero".into()));
        }
        let diff = u.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        linf = linf.max(diff / scale);
        maxmax = maxmax.max(diff);
    }
    Ok((linf, maxmax))
}

fn sci<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{x:.6e}"))
}

/// One CSV row; column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub study: String,
    pub method: Method,
    pub problem: ProblemKind,
    pub nu: f64,
    pub n_v: usize,
    pub n_x: usize,
    /// `adaptive` or `fixed`.
    pub mode: &'static str,
    #[serde(serialize_with = "sci")]
    pub rtol_or_h: f64,
    pub norm: NormKind,
    pub eig_mode: EigMode,
    pub q_lambda: f64,
    pub tau: f64,
    pub seed: u64,
    #[serde(serialize_with = "sci")]
    pub error_linf20: f64,
    #[serde(serialize_with = "sci")]
    pub error_maxmax: f64,
    #[serde(serialize_with = "sci")]
    pub runtime_s: f64,
    pub steps: usize,
    pub rejected: usize,
    pub failure_rate: f64,
    pub rhs_evals: usize,
    pub stages_total: usize,
    pub domeig_iters: usize,
    pub newton_iters: usize,
    pub cg_iters: usize,
    pub blew_up: bool,
    pub status: String,
    pub fingerprint: String,
}

/// Integrates one point (a single rtol or fixed step) and scores it against `reference`.
pub fn run_point(
    cfg: &ExperimentConfig,
    problem: &BenchProblem,
    reference: &ReferenceSolution,
    rtol: f64,
    fixed_h: Option<f64>,
    study: &str,
) -> Result<(Row, RunOutput)> {
    let solver = cfg.solver_config(rtol)?;
    let u0 = problem.initial_condition();
    let times = cfg.sample_times();
    let out = match fixed_h {
        Some(h) => advance_fixed(problem.rhs(), &u0, h, &times, &solver)?,
        None => advance_adaptive(problem.rhs(), &u0, &times, &solver)?,
    };
    let (linf, maxmax) =
        if out.completed() { error_metrics(&out.samples, &reference.snapshots)? } else { (f64::NAN, f64::NAN) };
    let mut point = cfg.clone();
    point.rtol = vec![rtol];
    point.fixed_h = fixed_h.into_iter().collect();
    let status = match &out.status {
        crate::timeloop::RunStatus::Aborted { reason, .. } => format!("aborted: {reason}"),
        other => other.label().to_string(),
    };
    let row = Row {
        study: study.to_string(),
        method: cfg.method,
        problem: cfg.problem,
        nu: cfg.nu,
        n_v: cfg.nv,
        n_x: cfg.nx,
        mode: if fixed_h.is_some() { "fixed" } else { "adaptive" },
        rtol_or_h: fixed_h.unwrap_or(rtol),
        norm: cfg.norm,
        eig_mode: cfg.eig_mode,
        q_lambda: cfg.q_lambda,
        tau: cfg.tau,
        seed: cfg.seed,
        error_linf20: linf,
        error_maxmax: maxmax,
        runtime_s: out.stats.wall_time.as_secs_f64(),
        steps: out.stats.accepted,
        rejected: out.stats.rejected,
        failure_rate: out.stats.failure_rate(),
        rhs_evals: out.stats.rhs_evals,
        stages_total: out.stats.stages_total,
        domeig_iters: out.stats.domeig_iters,
        newton_iters: out.stats.newton_iters,
        cg_iters: out.stats.cg_iters,
        blew_up: out.blew_up(),
        status,
        fingerprint: point.fingerprint(),
    };
    Ok((row, out))
}

/// Every `(rtol | fixed_h)` point of `cfg`, in list order.
pub fn run_experiment(cfg: &ExperimentConfig, store: &ReferenceStore, study: &str) -> Result<Vec<Row>> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let reference = store.get(&problem, cfg.tf)?;
    let mut rows = vec![];
    if cfg.fixed_h.is_empty() {
        for &rtol in &cfg.rtol {
            rows.push(run_point(cfg, &problem, &reference, rtol, None, study)?.0);
        }
    } else {
        for &h in &cfg.fixed_h {
            rows.push(run_point(cfg, &problem, &reference, cfg.rtol[0], Some(h), study)?.0);
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes to `path`, or standard output when `None`.
pub fn write_csv_to(path: Option<&Path>, rows: &[Row]) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            write_csv(std::fs::File::create(p)?, rows)
        }
        None => write_csv(std::io::stdout().lock(), rows),
    }
}
