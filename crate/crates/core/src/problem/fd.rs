//! Second-order centered finite differences in flux form.

use nalgebra::DMatrix;

use super::{assemble_matrix, initial_profile, Diffusivity, Rhs};
use crate::error::{Error, Result};
use crate::state::{GridLayout, LayoutKind, StateVector};

/// Periodic FD discretization of `d/dv (D(v) d/dv f)` on `n_v x n_x` nodes.
///
/// Nodes sit at `v_i = -pi + i dv`; `face_d[i]` holds `D` at `v_i + dv/2`.
/// Each `x` line is an independent copy of the same 1-D operator.
#[derive(Debug, Clone)]
pub struct FdProblem {
    layout: GridLayout,
    diffusivity: Diffusivity,
    face_d: Vec<f64>,
}

impl FdProblem {
    /// Benchmark configuration with `D = nu (1 + 0.99 sin v)`.
    pub fn new(layout: GridLayout, nu: f64) -> Result<Self> {
        Self::with_diffusivity(layout, Diffusivity::benchmark(nu))
    }

    pub fn with_diffusivity(layout: GridLayout, diffusivity: Diffusivity) -> Result<Self> {
        if layout.kind() != LayoutKind::Fd {
            return Err(Error::LayoutMismatch("FdProblem needs an FD layout".into()));
        }
        diffusivity.validate()?;
        let dv = layout.dv();
        let face_d = (0..layout.n_v()).map(|i| diffusivity.value(node(i, dv) + 0.5 * dv)).collect();
        Ok(Self { layout, diffusivity, face_d })
    }

    pub fn nu(&self) -> f64 {
        self.diffusivity.nu
    }

    pub fn diffusivity(&self) -> Diffusivity {
        self.diffusivity
    }

    pub fn face_d(&self) -> &[f64] {
        &self.face_d
    }

    /// `v` coordinate of node `i`.
    pub fn node(&self, i: usize) -> f64 {
        node(i, self.layout.dv())
    }

    /// Benchmark profile sampled at the nodes (same on every `x` line).
    pub fn initial_condition(&self) -> StateVector {
        let n_v = self.layout.n_v();
        let line: Vec<f64> = (0..n_v).map(|i| initial_profile(self.node(i))).collect();
        let mut u = StateVector::zeros(self.layout);
        for chunk in u.values_mut().chunks_exact_mut(n_v) {
            chunk.copy_from_slice(&line);
        }
        u
    }

    /// `4 max_f D_f / dv^2`, a Gershgorin bound on the spectral radius.
    pub fn lambda_user(&self) -> f64 {
        let dmax = self.face_d.iter().cloned().fold(0.0, f64::max);
        4.0 * dmax / (self.layout.dv() * self.layout.dv())
    }

    /// Diagonal entries `-(D_{i+1/2} + D_{i-1/2}) / dv^2`.
    pub fn jacobian_diagonal(&self) -> StateVector {
        let n_v = self.layout.n_v();
        let inv = 1.0 / (self.layout.dv() * self.layout.dv());
        let line: Vec<f64> = (0..n_v).map(|i| -(self.face_d[i] + self.face_d[(i + n_v - 1) % n_v]) * inv).collect();
        let mut d = StateVector::zeros(self.layout);
        for chunk in d.values_mut().chunks_exact_mut(n_v) {
            chunk.copy_from_slice(&line);
        }
        d
    }

    /// Total mass `sum u dv dx`.
    pub fn mass(&self, u: &[f64]) -> f64 {
        let mut acc = crate::state::CompensatedSum::default();
        for x in u {
            acc.add(*x);
        }
        acc.value() * self.layout.dv() * self.layout.dx()
    }

    /// Dense oracle for small grids.
    pub fn assemble_matrix(&self) -> Result<DMatrix<f64>> {
        assemble_matrix(self, 0.0)
    }

    /// The same operator restricted to one `x` line.
    pub fn single_line(&self) -> Self {
        Self::with_diffusivity(self.layout.single_line(), self.diffusivity).expect("valid")
    }
}

#[inline]
fn node(i: usize, dv: f64) -> f64 {
    -std::f64::consts::PI + i as f64 * dv
}

impl Rhs for FdProblem {
    fn layout(&self) -> &GridLayout {
        &self.layout
    }

    fn eval(&self, _t: f64, u: &[f64], du: &mut [f64]) {
        let n_v = self.layout.n_v();
        let inv = 1.0 / (self.layout.dv() * self.layout.dv());
        let d = &self.face_d;
        for (ul, dl) in u.chunks_exact(n_v).zip(du.chunks_exact_mut(n_v)) {
            if n_v == 1 {
                dl[0] = 0.0;
                continue;
            }
            // flux[i] = D_{i+1/2} (u_{i+1} - u_i)
            let mut left_flux = d[n_v - 1] * (ul[0] - ul[n_v - 1]);
            for i in 0..n_v {
                let ip = if i + 1 == n_v { 0 } else { i + 1 };
                let right_flux = d[i] * (ul[ip] - ul[i]);
                dl[i] = (right_flux - left_flux) * inv;
                left_flux = right_flux;
            }
        }
    }

    fn lambda_user(&self) -> Option<f64> {
        Some(FdProblem::lambda_user(self))
    }

    fn constant_mode(&self) -> Option<Vec<f64>> {
        Some(vec![1.0; self.layout.len()])
    }

    fn jacobian_diagonal(&self) -> Option<Vec<f64>> {
        Some(FdProblem::jacobian_diagonal(self).into_values())
    }
}
