//! Matrix-free dominant-eigenvalue estimation by power iteration.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Rhs;
use crate::state::{wrms_slice, NormKind, StateVector, ToleranceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIterConfig {
    /// Relative change in the Rayleigh quotient that counts as converged.
    pub tau: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Norm used to scale the difference-quotient perturbation.
    pub norm_kind: NormKind,
    /// Unchecked iterations before convergence testing starts.
    #[serde(default)]
    pub warmup_iters: usize,
}

impl Default for PowerIterConfig {
    fn default() -> Self {
        Self { tau: 0.1, max_iters: 100, seed: 0, norm_kind: NormKind::Cell, warmup_iters: 0 }
    }
}

impl PowerIterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidArgument(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if self.max_iters < 2 {
            return Err(Error::InvalidArgument("max_iters must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomEigEstimate {
    /// Signed Rayleigh quotient at the last iterate.
    pub lambda_approx: f64,
    /// Convergence checks performed, not counting warmups.
    pub iters: usize,
    pub converged: bool,
    /// Right-hand-side evaluations spent, including the base evaluation at `f`.
    pub rhs_evals: usize,
    /// Last normalized iterate; useful to warm-start a later estimate.
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigSafety {
    pub q_lambda: f64,
}

impl Default for EigSafety {
    fn default() -> Self {
        Self { q_lambda: 1.1 }
    }
}

impl EigSafety {
    pub fn new(q_lambda: f64) -> Result<Self> {
        if !(q_lambda > 0.0) || !q_lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("q_lambda must be > 0, got {q_lambda}")));
        }
        Ok(Self { q_lambda })
    }

    /// Smallest factor that still covers an estimate converged to relative change `tau`.
    pub fn minimum_for(tau: f64) -> f64 {
        1.0 / (1.0 - tau)
    }

    /// Warning text when `q_lambda` does not exceed [`EigSafety::minimum_for`].
    pub fn warning(&self, tau: f64) -> Option<String> {
        let min = Self::minimum_for(tau);
        (self.q_lambda <= min).then(|| {
            format!("q_lambda = {} is not above 1/(1 - tau) = {min:.6}; stage counts may be too small", self.q_lambda)
        })
    }
}

/// `(G(t, f + sigma v) - G(t, f)) / sigma` with `sigma = 1 / ||v||_WRMS`.
///
/// `g_f` must hold `G(t, f)`; `work` is scratch of the same length.
#[allow(clippy::too_many_arguments)]
pub fn matvec_dq_slice(
    rhs: &dyn Rhs,
    t: f64,
    f: &[f64],
    g_f: &[f64],
    v: &[f64],
    tol: &ToleranceSpec,
    norm: NormKind,
    out: &mut [f64],
    work: &mut [f64],
) -> Result<()> {
    let nv = wrms_slice(norm, rhs.layout(), v, f, tol);
    if !(nv > 0.0) || !nv.is_finite() {
        return Err(Error::InvalidArgument(format!("difference-quotient direction has norm {nv}")));
    }
    let sigma = 1.0 / nv;
    for ((w, fi), vi) in work.iter_mut().zip(f).zip(v) {
        *w = fi + sigma * vi;
    }
    rhs.eval(t, work, out);
    for (o, g) in out.iter_mut().zip(g_f) {
        *o = (*o - g) / sigma;
    }
    Ok(())
}

/// Checked allocating form of [`matvec_dq_slice`].
pub fn matvec_dq(
    rhs: &dyn Rhs,
    t: f64,
    f: &StateVector,
    v: &StateVector,
    tol: &ToleranceSpec,
    norm: NormKind,
) -> Result<StateVector> {
    f.check_same_layout(v)?;
    let g = rhs.apply(t, f)?;
    let mut out = StateVector::zeros(*f.layout());
    let mut work = vec![0.0; f.len()];
    matvec_dq_slice(rhs, t, f.values(), g.values(), v.values(), tol, norm, out.values_mut(), &mut work)?;
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Seeded uniform start vector with the constant mode projected out.
pub fn start_vector(rhs: &dyn Rhs, seed: u64) -> Vec<f64> {
    let n = rhs.layout().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    if let Some(c) = rhs.constant_mode() {
        let cc = dot(&c, &c);
        if cc > 0.0 {
            let a = dot(&v, &c) / cc;
            for (vi, ci) in v.iter_mut().zip(&c) {
                *vi -= a * ci;
            }
        }
    }
    v
}

/// Power iteration from a seeded random start.
pub fn power_iterate(
    rhs: &dyn Rhs,
    t: f64,
    f: &[f64],
    cfg: &PowerIterConfig,
    tol: &ToleranceSpec,
) -> Result<DomEigEstimate> {
    power_iterate_from(rhs, t, f, cfg, tol, None)
}

/// Power iteration; `start` replaces the random start vector when given.
pub fn power_iterate_from(
    rhs: &dyn Rhs,
    t: f64,
    f: &[f64],
    cfg: &PowerIterConfig,
    tol: &ToleranceSpec,
    start: Option<&[f64]>,
) -> Result<DomEigEstimate> {
    cfg.validate()?;
    let n = rhs.layout().len();
    if f.len() != n {
        return Err(Error::LayoutMismatch(format!("state has {} entries, operator {n}", f.len())));
    }
    let mut g_f = vec![0.0; n];
    rhs.eval(t, f, &mut g_f);
    let mut rhs_evals = 1;

    let mut v = match start {
        Some(s) if s.len() == n && s.iter().any(|x| *x != 0.0) => s.to_vec(),
        _ => start_vector(rhs, cfg.seed),
    };
    let mut reseeded = false;
    let mut w = vec![0.0; n];
    let mut work = vec![0.0; n];
    let mut prev: Option<f64> = None;
    let mut lambda = 0.0;

    let warmups = cfg.warmup_iters;
    for k in 0..=cfg.max_iters + warmups {
        let vv = dot(&v, &v);
        if !(vv > 0.0) {
            return Err(Error::PowerIteration("iterate vanished".into()));
        }
        matvec_dq_slice(rhs, t, f, &g_f, &v, tol, cfg.norm_kind, &mut w, &mut work)?;
        rhs_evals += 1;
        let ww = dot(&w, &w);
        if !ww.is_finite() {
            return Err(Error::PowerIteration("non-finite matvec".into()));
        }
        if ww == 0.0 {
            if reseeded || k > 0 {
                return Err(Error::PowerIteration("Jv = 0: direction lies in the nullspace".into()));
            }
            reseeded = true;
            v = start_vector(rhs, cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
            continue;
        }
        lambda = dot(&v, &w) / vv;
        if let Some(p) = prev {
            if lambda != 0.0 && ((lambda - p) / lambda).abs() < cfg.tau {
                return Ok(DomEigEstimate {
                    lambda_approx: lambda,
                    iters: k - warmups,
                    converged: true,
                    rhs_evals,
                    vector: v,
                });
            }
        }
        if k >= warmups {
            prev = Some(lambda);
        }
        let inv = 1.0 / ww.sqrt();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi * inv;
        }
    }
    Ok(DomEigEstimate { lambda_approx: lambda, iters: cfg.max_iters, converged: false, rhs_evals, vector: v })
}

/// `q_lambda |lambda_approx|`, rejecting positive dominant eigenvalues.
pub fn effective_lambda(est: &DomEigEstimate, safety: &EigSafety) -> Result<f64> {
    if !est.converged {
        return Err(Error::PowerIteration(format!("estimate did not converge in {} iterations", est.iters)));
    }
    if est.lambda_approx > 0.0 {
        return Err(Error::PositiveEigenvalue(est.lambda_approx));
    }
    Ok(safety.q_lambda * est.lambda_approx.abs())
}
