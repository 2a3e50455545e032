//! Piecewise-linear modal DG with symmetric interior penalty (SIPG).
//!
//! Per cell the basis is `{1, psi(xi_v), psi(xi_x), psi(xi_v) psi(xi_x)}` with
//! `psi(xi) = sqrt(3) xi`, orthonormal for the cell-mean inner product. The
//! first coefficient is therefore the cell average and the mass matrix is
//! `|cell| I`. Diffusion acts along `v` only, so the `x`-mode pairs
//! `(0, 1)` and `(2, 3)` are each evolved by the same 1-D SIPG operator.

use nalgebra::DMatrix;

use super::{assemble_matrix, gauss_legendre, initial_profile, Diffusivity, Rhs};
use crate::error::{Error, Result};
use crate::state::{GridLayout, LayoutKind, StateVector};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Polynomial degree of the basis.
const DEGREE: usize = 1;

#[derive(Debug, Clone)]
pub struct DgProblem {
    layout: GridLayout,
    diffusivity: Diffusivity,
    penalty_c: f64,
    quad_order: usize,
    stiffness_points: usize,
    /// `d^2 * int_cell D dv` with `d = 2 sqrt(3) / dv`, the slope-slope volume term.
    volume: Vec<f64>,
    /// `D` at the right face of each cell.
    face_d: Vec<f64>,
}

impl DgProblem {
    pub const DEFAULT_PENALTY: f64 = 0.54;
    pub const DEFAULT_QUAD_ORDER: usize = 8;
    pub const DEFAULT_STIFFNESS_POINTS: usize = 2;

    /// Benchmark configuration: `D = nu (1 + 0.99 sin v)`, default penalty and quadrature.
    pub fn new(layout: GridLayout, nu: f64) -> Result<Self> {
        Self::with_options(layout, Diffusivity::benchmark(nu), Self::DEFAULT_PENALTY, Self::DEFAULT_QUAD_ORDER)
    }

    pub fn with_diffusivity(layout: GridLayout, diffusivity: Diffusivity) -> Result<Self> {
        Self::with_options(layout, diffusivity, Self::DEFAULT_PENALTY, Self::DEFAULT_QUAD_ORDER)
    }

    /// `penalty_c` scales the face penalty `tau_f = penalty_c (p+1)^2 D(v_f) / dv`.
    pub fn with_options(
        layout: GridLayout,
        diffusivity: Diffusivity,
        penalty_c: f64,
        quad_order: usize,
    ) -> Result<Self> {
        if layout.kind() != LayoutKind::Dg {
            return Err(Error::LayoutMismatch("DgProblem needs a DG layout".into()));
        }
        diffusivity.validate()?;
        if !(penalty_c > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty_c must be > 0, got {penalty_c}")));
        }
        if quad_order == 0 {
            return Err(Error::InvalidArgument("quad_order must be >= 1".into()));
        }
        let mut p = Self {
            layout,
            diffusivity,
            penalty_c,
            quad_order,
            stiffness_points: Self::DEFAULT_STIFFNESS_POINTS,
            volume: vec![],
            face_d: vec![],
        };
        p.precompute();
        Ok(p)
    }

    fn precompute(&mut self) {
        let n_v = self.layout.n_v();
        let dv = self.layout.dv();
        let d = 2.0 * SQRT3 / dv;
        self.volume = (0..n_v)
            .map(|i| d * d * self.integrate_cell(i, self.stiffness_points, |v| self.diffusivity.value(v)))
            .collect();
        self.face_d = (0..n_v).map(|i| self.diffusivity.value(self.left_edge(i) + dv)).collect();
    }

    pub fn nu(&self) -> f64 {
        self.diffusivity.nu
    }
    pub fn diffusivity(&self) -> Diffusivity {
        self.diffusivity
    }
    pub fn penalty_c(&self) -> f64 {
        self.penalty_c
    }
    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    /// Left edge of cell `i` along `v`.
    pub fn left_edge(&self, i: usize) -> f64 {
        -std::f64::consts::PI + i as f64 * self.layout.dv()
    }

    /// `int_cell g(v) dv` with `n` Gauss points.
    fn integrate_cell(&self, i: usize, n: usize, g: impl Fn(f64) -> f64) -> f64 {
        let dv = self.layout.dv();
        let vl = self.left_edge(i);
        let (x, w) = gauss_legendre(n);
        0.5 * dv * x.iter().zip(&w).map(|(x, w)| w * g(vl + 0.5 * dv * (x + 1.0))).sum::<f64>()
    }

    /// Cell average of `D` over cell `i`, by `quad_order`-point quadrature.
    pub fn cell_average_d(&self, i: usize) -> f64 {
        self.integrate_cell(i, self.quad_order, |v| self.diffusivity.value(v)) / self.layout.dv()
    }

    /// `max_i Dbar_i (4 / dv)^2`.
    pub fn lambda_user(&self) -> f64 {
        let dv = self.layout.dv();
        let dmax = (0..self.layout.n_v()).map(|i| self.cell_average_d(i)).fold(0.0, f64::max);
        dmax * (4.0 / dv).powi(2)
    }

    /// L2 projection of the benchmark profile; `x`-slope coefficients are zero.
    pub fn initial_condition(&self) -> StateVector {
        self.project(initial_profile)
    }

    /// L2 projection of an `x`-independent function `g(v)`.
    pub fn project(&self, g: impl Fn(f64) -> f64) -> StateVector {
        let n_v = self.layout.n_v();
        let dv = self.layout.dv();
        let (x, w) = gauss_legendre(self.quad_order);
        let line: Vec<[f64; 2]> = (0..n_v)
            .map(|i| {
                let vl = self.left_edge(i);
                let (mut a0, mut a1) = (0.0, 0.0);
                for (xi, wi) in x.iter().zip(&w) {
                    let gv = g(vl + 0.5 * dv * (xi + 1.0));
                    a0 += 0.5 * wi * gv;
                    a1 += 0.5 * wi * gv * SQRT3 * xi;
                }
                [a0, a1]
            })
            .collect();
        let mut u = StateVector::zeros(self.layout);
        let vals = u.values_mut();
        for k in 0..self.layout.n_x() {
            for (i, a) in line.iter().enumerate() {
                let o = self.layout.cell_offset(i, k);
                vals[o] = a[0];
                vals[o + 1] = a[1];
            }
        }
        u
    }

    /// Point value at `(v, x)`.
    pub fn evaluate(&self, u: &[f64], v: f64, x: f64) -> f64 {
        let (i, xi_v) = locate(v, self.layout.n_v());
        let (k, xi_x) = locate(x, self.layout.n_x());
        let o = self.layout.cell_offset(i, k);
        let (pv, px) = (SQRT3 * xi_v, SQRT3 * xi_x);
        u[o] + u[o + 1] * pv + u[o + 2] * px + u[o + 3] * pv * px
    }

    /// Total mass `sum_cells avg * dv * dx`.
    pub fn mass(&self, u: &[f64]) -> f64 {
        let mut acc = crate::state::CompensatedSum::default();
        for c in u.chunks_exact(4) {
            acc.add(c[0]);
        }
        acc.value() * self.layout.dv() * self.layout.dx()
    }

    pub fn assemble_matrix(&self) -> Result<DMatrix<f64>> {
        assemble_matrix(self, 0.0)
    }

    pub fn single_line(&self) -> Self {
        Self::with_options(self.layout.single_line(), self.diffusivity, self.penalty_c, self.quad_order).expect("valid")
    }

    /// Applies the 1-D SIPG operator to one `(x line, x mode)` family.
    fn apply_family(&self, u: &[f64], du: &mut [f64], k: usize, mode: usize) {
        let n_v = self.layout.n_v();
        let dv = self.layout.dv();
        let d = 2.0 * SQRT3 / dv;
        let tau_scale = self.penalty_c * ((DEGREE + 1) * (DEGREE + 1)) as f64 / dv;
        let idx = |i: usize| self.layout.cell_offset(i, k) + 2 * mode;

        // a(u, phi) accumulated in du, scaled at the end
        for i in 0..n_v {
            let o = idx(i);
            du[o] = 0.0;
            du[o + 1] = self.volume[i] * u[o + 1];
        }
        if n_v == 1 {
            // single periodic cell: u is continuous through its own face
            let o = idx(0);
            let jump = 2.0 * SQRT3 * u[o + 1];
            let avgd = d * u[o + 1];
            let df = self.face_d[0];
            let tau = tau_scale * df;
            du[o + 1] += -df * avgd * 2.0 * SQRT3 - df * d * jump + tau * jump * 2.0 * SQRT3;
        } else {
            for i in 0..n_v {
                let j = if i + 1 == n_v { 0 } else { i + 1 };
                let (ol, or) = (idx(i), idx(j));
                let (l0, l1, r0, r1) = (u[ol], u[ol + 1], u[or], u[or + 1]);
                let jump = (l0 + SQRT3 * l1) - (r0 - SQRT3 * r1);
                let avgd = 0.5 * d * (l1 + r1);
                let df = self.face_d[i];
                let tau = tau_scale * df;
                // left cell, trace (1, sqrt3)
                du[ol] += -df * avgd + tau * jump;
                du[ol + 1] += -df * avgd * SQRT3 - df * 0.5 * d * jump + tau * jump * SQRT3;
                // right cell, jump of test function is (-1, sqrt3)
                du[or] += df * avgd - tau * jump;
                du[or + 1] += -df * avgd * SQRT3 - df * 0.5 * d * jump + tau * jump * SQRT3;
            }
        }
        let scale = -1.0 / dv;
        for i in 0..n_v {
            let o = idx(i);
            du[o] *= scale;
            du[o + 1] *= scale;
        }
    }
}

/// Cell index and reference coordinate in `[-1, 1]` of `s` on the periodic `[-pi, pi)`.
fn locate(s: f64, n: usize) -> (usize, f64) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let h = two_pi / n as f64;
    let r = (s + std::f64::consts::PI).rem_euclid(two_pi);
    let i = ((r / h) as usize).min(n - 1);
    let xi = 2.0 * (r - i as f64 * h) / h - 1.0;
    (i, xi)
}

impl Rhs for DgProblem {
    fn layout(&self) -> &GridLayout {
        &self.layout
    }

    fn eval(&self, _t: f64, u: &[f64], du: &mut [f64]) {
        for k in 0..self.layout.n_x() {
            self.apply_family(u, du, k, 0);
            self.apply_family(u, du, k, 1);
        }
    }

    fn lambda_user(&self) -> Option<f64> {
        Some(DgProblem::lambda_user(self))
    }

    fn constant_mode(&self) -> Option<Vec<f64>> {
        let mut c = vec![0.0; self.layout.len()];
        for cell in c.chunks_exact_mut(4) {
            cell[0] = 1.0;
        }
        Some(c)
    }
}
