//! Right-hand-side abstraction and the two discretizations of the
//! variable-coefficient diffusion benchmark.

mod dg;
mod fd;

use std::f64::consts::PI;

use nalgebra::DMatrix;

pub use dg::DgProblem;
pub use fd::FdProblem;

use crate::error::{Error, Result};
use crate::state::{GridLayout, StateVector};

/// Semi-discrete operator `G(t, f)` of the IVP `f' = G(t, f)`.
pub trait Rhs: Sync {
    fn layout(&self) -> &GridLayout;

    /// Writes `G(t, u)` into `du`. Both slices have `layout().len()` entries.
    fn eval(&self, t: f64, u: &[f64], du: &mut [f64]);

    /// Analytic upper bound on the dominant eigenvalue magnitude, if known.
    fn lambda_user(&self) -> Option<f64> {
        None
    }

    /// Diagonal of the Jacobian, when the problem can supply it cheaply.
    fn jacobian_diagonal(&self) -> Option<Vec<f64>> {
        None
    }

    /// Discrete representation of a spatially constant function, when it spans
    /// a known nullspace direction of the operator.
    fn constant_mode(&self) -> Option<Vec<f64>> {
        None
    }

    /// Checked, allocating evaluation on a [`StateVector`].
    fn apply(&self, t: f64, u: &StateVector) -> Result<StateVector> {
        if u.layout() != self.layout() {
            return Err(Error::LayoutMismatch(format!("state on {:?}, operator on {:?}", u.layout(), self.layout())));
        }
        let mut du = StateVector::zeros(*self.layout());
        self.eval(t, u.values(), du.values_mut());
        Ok(du)
    }
}

/// `D(v) = nu (1 + amplitude sin v)`; the benchmark uses `amplitude = 0.99`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusivity {
    pub nu: f64,
    pub amplitude: f64,
}

impl Diffusivity {
    pub const BENCHMARK_AMPLITUDE: f64 = 0.99;

    pub fn benchmark(nu: f64) -> Self {
        Self { nu, amplitude: Self::BENCHMARK_AMPLITUDE }
    }

    pub fn uniform(d: f64) -> Self {
        Self { nu: d, amplitude: 0.0 }
    }

    #[inline]
    pub fn value(&self, v: f64) -> f64 {
        self.nu * (1.0 + self.amplitude * v.sin())
    }

    /// `dD/dv`.
    pub fn derivative(&self, v: f64) -> f64 {
        self.nu * self.amplitude * v.cos()
    }

    fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !(self.amplitude.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "diffusivity must stay positive (nu = {}, amplitude = {})",
                self.nu, self.amplitude
            )));
        }
        Ok(())
    }
}

/// Benchmark initial condition, independent of `x`.
pub fn initial_profile(v: f64) -> f64 {
    (1.0 + 0.3 * (2.0 * v).sin()) / (5.5 * PI).sqrt() * (-v * v / 5.5).exp()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one quadrature point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Largest system the dense oracles will assemble.
pub const DENSE_GUARD: usize = 4096;

/// Dense matrix whose columns are `G(t, e_j)`; exact for linear operators.
pub fn assemble_matrix(rhs: &dyn Rhs, t: f64) -> Result<DMatrix<f64>> {
    let n = rhs.layout().len();
    if n > DENSE_GUARD {
        return Err(Error::SizeGuard { n, limit: DENSE_GUARD });
    }
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        rhs.eval(t, &e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(m)
}

/// Linear operator backed by a dense matrix; handy as a test fixture.
pub struct MatrixRhs {
    layout: GridLayout,
    matrix: DMatrix<f64>,
}

impl MatrixRhs {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("operator matrix must be square".into()));
        }
        let layout = GridLayout::fd(matrix.nrows(), 1)?;
        Ok(Self { layout, matrix })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl Rhs for MatrixRhs {
    fn layout(&self) -> &GridLayout {
        &self.layout
    }

    fn eval(&self, _t: f64, u: &[f64], du: &mut [f64]) {
        let n = u.len();
        for (i, d) in du.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..n {
                s += self.matrix[(i, j)] * u[j];
            }
            *d = s;
        }
    }

    fn jacobian_diagonal(&self) -> Option<Vec<f64>> {
        Some(self.matrix.diagonal().iter().copied().collect())
    }
}

/// Operator defined by a closure `(t, u, du)`.
pub struct FnRhs<F> {
    layout: GridLayout,
    f: F,
}

impl<F> FnRhs<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        Self { layout: GridLayout::fd(n, 1).expect("n > 0"), f }
    }

    pub fn on_layout(layout: GridLayout, f: F) -> Self {
        Self { layout, f }
    }
}

impl<F> Rhs for FnRhs<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    fn layout(&self) -> &GridLayout {
        &self.layout
    }
    fn eval(&self, t: f64, u: &[f64], du: &mut [f64]) {
        (self.f)(t, u, du)
    }
}
