//! Diagonally implicit Runge-Kutta baselines with inexact Newton stage solves
//! and Jacobi-preconditioned conjugate gradients.

use crate::domeig::matvec_dq_slice;
use crate::error::{Error, Result, StepFailure};
use crate::problem::Rhs;
use crate::state::{wrms_slice, NormKind, ToleranceSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub stages: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub b_embedded: Vec<f64>,
    pub c: Vec<f64>,
    pub order: usize,
    pub embedded_order: usize,
}

impl ButcherTableau {
    pub fn is_stiffly_accurate(&self) -> bool {
        self.a[self.stages - 1].iter().zip(&self.b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    /// Stability function `1 + z b^T (I - z A)^{-1} 1` on the scalar test problem.
    pub fn stability_function(&self, z: f64) -> f64 {
        let s = self.stages;
        // forward substitution on the lower-triangular system (I - zA) k = 1
        let mut k = vec![0.0; s];
        for i in 0..s {
            let mut r = 1.0;
            for j in 0..i {
                r += z * self.a[i][j] * k[j];
            }
            k[i] = r / (1.0 - z * self.a[i][i]);
        }
        1.0 + z * self.b.iter().zip(&k).map(|(b, k)| b * k).sum::<f64>()
    }
}

pub fn dirk_tableau(order: usize) -> Result<ButcherTableau> {
    let r2 = std::f64::consts::SQRT_2;
    match order {
        2 => {
            let g = 1.0 - 1.0 / r2;
            let d = 1.0 / (2.0 * r2);
            let be = (4.0 - r2) / 8.0;
            Ok(ButcherTableau {
                name: "dirk2",
                stages: 3,
                a: vec![vec![0.0, 0.0, 0.0], vec![g, g, 0.0], vec![d, d, g]],
                b: vec![d, d, g],
                b_embedded: vec![be, be, 1.0 / (2.0 * r2)],
                c: vec![0.0, 2.0 - r2, 1.0],
                order: 2,
                embedded_order: 1,
            })
        }
        3 => {
            let g = 9.0 / 40.0;
            let a31 = 9.0 * (1.0 + r2) / 80.0;
            let a41 = (22.0 + 15.0 * r2) / (80.0 * (1.0 + r2));
            let a43 = -7.0 / (40.0 * (1.0 + r2));
            let b1 = (2398.0 + 1205.0 * r2) / (2835.0 * (4.0 + 3.0 * r2));
            let b3 = -2374.0 * (1.0 + 2.0 * r2) / (2835.0 * (5.0 + 3.0 * r2));
            let b4 = 5827.0 / 7560.0;
            let b = vec![b1, b1, b3, b4, g];
            let d1 = (5547709.0 * r2 - 4800247.0) / 16519545.0;
            let d3 = 11095418.0 * (1.0 - r2) / 16519545.0;
            let d4 = 30698249.0 / 44052120.0;
            let d5 = 49563.0 / 233080.0;
            Ok(ButcherTableau {
                name: "dirk3",
                stages: 5,
                a: vec![
                    vec![0.0; 5],
                    vec![g, g, 0.0, 0.0, 0.0],
                    vec![a31, a31, g, 0.0, 0.0],
                    vec![a41, a41, a43, g, 0.0],
                    b.clone(),
                ],
                b,
                b_embedded: vec![d1, d1, d3, d4, d5],
                c: vec![0.0, 9.0 / 20.0, 9.0 * (2.0 + r2) / 40.0, 3.0 / 5.0, 1.0],
                order: 3,
                embedded_order: 2,
            })
        }
        other => Err(Error::InvalidArgument(format!("no DIRK tableau of order {other}; use 2 or 3"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Stage residual target in the WRMS norm.
    pub tol: f64,
    pub max_iters: usize,
    pub max_cg_iters: usize,
    /// CG stops once its residual is `eta * tol` in the WRMS norm.
    pub eta: f64,
    pub norm: NormKind,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 0.1, max_iters: 5, max_cg_iters: 500, eta: 0.1, norm: NormKind::Cell }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.eta > 0.0) || self.max_iters == 0 || self.max_cg_iters == 0 {
            return Err(Error::InvalidArgument("newton tolerances and iteration caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iters: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG from a zero initial guess, stopping when
/// `norm(r) <= tol * norm(b)`.
pub fn cg_solve_with<A, N>(
    mut apply_a: A,
    b: &[f64],
    precond_diag: &[f64],
    tol: f64,
    max_iters: usize,
    norm: N,
) -> Result<CgResult>
where
    A: FnMut(&[f64], &mut [f64]) -> Result<()>,
    N: Fn(&[f64]) -> f64,
{
    let n = b.len();
    if precond_diag.len() != n || precond_diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Cg("preconditioner must be positive with matching length".into()));
    }
    let mut x = vec![0.0; n];
    let target = tol * norm(b);
    if norm(b) <= target || b.iter().all(|v| *v == 0.0) {
        return Ok(CgResult { x, iters: 0 });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(precond_diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iters {
        apply_a(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Cg(format!("operator not positive definite (p^T A p = {pap:e})")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= target {
            return Ok(CgResult { x, iters: it });
        }
        for i in 0..n {
            z[i] = r[i] / precond_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Cg(format!("no convergence in {max_iters} iterations")))
}

/// Preconditioned CG to relative Euclidean residual `tol`.
pub fn cg_solve<A>(apply_a: A, b: &[f64], precond_diag: &[f64], tol: f64, max_iters: usize) -> Result<CgResult>
where
    A: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    cg_solve_with(apply_a, b, precond_diag, tol, max_iters, |v| dot(v, v).sqrt())
}

/// Work counters for one DIRK step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirkCounters {
    pub newton_iters: usize,
    pub cg_iters: usize,
}

#[derive(Debug, Clone)]
pub struct DirkStep {
    pub f_next: Vec<f64>,
    /// `f_next - f_embedded`.
    pub error: Vec<f64>,
    pub counters: DirkCounters,
}

/// One DIRK step. `jac_diag` is the Jacobian diagonal used for the Jacobi
/// preconditioner `1 - h a_ii J_ii`; pass `None` to run CG unpreconditioned.
#[allow(clippy::too_many_arguments)]
pub fn dirk_step(
    rhs: &dyn Rhs,
    t_n: f64,
    f_n: &[f64],
    h: f64,
    tableau: &ButcherTableau,
    newton: &NewtonConfig,
    tol: &ToleranceSpec,
    jac_diag: Option<&[f64]>,
) -> std::result::Result<DirkStep, StepFailure> {
    let n = f_n.len();
    let layout = *rhs.layout();
    let wnorm = |v: &[f64]| wrms_slice(newton.norm, &layout, v, f_n, tol);
    let mut counters = DirkCounters::default();
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(tableau.stages);

    let mut z = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut resid = vec![0.0; n];
    for i in 0..tableau.stages {
        let ti = t_n + tableau.c[i] * h;
        let gamma = tableau.a[i][i];
        // explicit data a_i = f_n + h sum_{j<i} A_ij k_j
        let mut a_i = f_n.to_vec();
        for (j, k) in ks.iter().enumerate() {
            let w = h * tableau.a[i][j];
            if w != 0.0 {
                for (ai, kj) in a_i.iter_mut().zip(k) {
                    *ai += w * kj;
                }
            }
        }
        if gamma == 0.0 {
            z.copy_from_slice(&a_i);
            rhs.eval(ti, &z, &mut g);
        } else {
            let hg = h * gamma;
            let precond: Vec<f64> = match jac_diag {
                Some(d) => d.iter().map(|d| 1.0 - hg * d).collect(),
                None => vec![1.0; n],
            };
            z.copy_from_slice(f_n);
            rhs.eval(ti, &z, &mut g);
            let mut converged = false;
            for it in 0..=newton.max_iters {
                for k in 0..n {
                    resid[k] = z[k] - hg * g[k] - a_i[k];
                }
                let rn = wnorm(&resid);
                if !rn.is_finite() {
                    return Err(StepFailure::NonFinite);
                }
                if rn <= newton.tol {
                    converged = true;
                    break;
                }
                if it == newton.max_iters {
                    break;
                }
                let b: Vec<f64> = resid.iter().map(|r| -r).collect();
                let rel = newton.eta * newton.tol / rn;
                let zs = z.clone();
                let gs = g.clone();
                let apply = |v: &[f64], out: &mut [f64]| -> Result<()> {
                    if v.iter().all(|x| *x == 0.0) {
                        out.fill(0.0);
                        return Ok(());
                    }
                    let mut jv = vec![0.0; n];
                    let mut w = vec![0.0; n];
                    matvec_dq_slice(rhs, ti, &zs, &gs, v, tol, newton.norm, &mut jv, &mut w)?;
                    for k in 0..n {
                        out[k] = v[k] - hg * jv[k];
                    }
                    Ok(())
                };
                let sol = cg_solve_with(apply, &b, &precond, rel, newton.max_cg_iters, wnorm)
                    .map_err(|e| StepFailure::LinearSolver(e.to_string()))?;
                counters.newton_iters += 1;
                counters.cg_iters += sol.iters;
                for (zk, dk) in z.iter_mut().zip(&sol.x) {
                    *zk += dk;
                }
                rhs.eval(ti, &z, &mut g);
            }
            if !converged {
                return Err(StepFailure::NewtonDiverged { iters: counters.newton_iters });
            }
        }
        ks.push(g.clone());
    }
    let mut f_next = f_n.to_vec();
    let mut error = vec![0.0; n];
    for (j, k) in ks.iter().enumerate() {
        let (wb, we) = (h * tableau.b[j], h * (tableau.b[j] - tableau.b_embedded[j]));
        for i in 0..n {
            f_next[i] += wb * k[i];
            error[i] += we * k[i];
        }
    }
    if !f_next.iter().all(|x| x.is_finite()) {
        return Err(StepFailure::NonFinite);
    }
    Ok(DirkStep { f_next, error, counters })
}
