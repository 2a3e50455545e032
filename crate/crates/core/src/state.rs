//! State vectors, grid layouts and the two weighted RMS norms.
//!
//! Degrees of freedom are stored cell-major: cell `c = k * n_v + i` (the
//! `v` index runs fastest), and within a cell the `n_b` basis coefficients
//! are contiguous. Both norms and both discretizations rely on this ordering.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    Fd,
    Dg,
}

/// Discretization descriptor on the periodic square `[-pi, pi]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    kind: LayoutKind,
    n_v: usize,
    n_x: usize,
    n_b: usize,
}

impl GridLayout {
    /// Finite-difference grid: one unknown per node.
    pub fn fd(n_v: usize, n_x: usize) -> Result<Self> {
        Self::new(LayoutKind::Fd, n_v, n_x)
    }

    /// Piecewise-linear DG mesh: four modal coefficients per cell.
    pub fn dg(n_v: usize, n_x: usize) -> Result<Self> {
        Self::new(LayoutKind::Dg, n_v, n_x)
    }

    pub fn new(kind: LayoutKind, n_v: usize, n_x: usize) -> Result<Self> {
        if n_v == 0 || n_x == 0 {
            return Err(Error::InvalidArgument(format!("grid dimensions must be positive (n_v = {n_v}, n_x = {n_x})")));
        }
        let n_b = match kind {
            LayoutKind::Fd => 1,
            LayoutKind::Dg => 4,
        };
        Ok(Self { kind, n_v, n_x, n_b })
    }

    pub fn kind(&self) -> LayoutKind {
        self.kind
    }
    pub fn n_v(&self) -> usize {
        self.n_v
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    /// Degrees of freedom per cell.
    pub fn n_b(&self) -> usize {
        self.n_b
    }
    pub fn n_cells(&self) -> usize {
        self.n_v * self.n_x
    }
    /// Total number of unknowns.
    pub fn len(&self) -> usize {
        self.n_cells() * self.n_b
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn dv(&self) -> f64 {
        2.0 * PI / self.n_v as f64
    }
    pub fn dx(&self) -> f64 {
        2.0 * PI / self.n_x as f64
    }

    /// Index of the first dof of cell `(i, k)` (`i` along `v`, `k` along `x`).
    #[inline]
    pub fn cell_offset(&self, i: usize, k: usize) -> usize {
        (k * self.n_v + i) * self.n_b
    }

    /// Same layout with a single `x` line.
    pub fn single_line(&self) -> Self {
        Self { n_x: 1, ..*self }
    }
}

/// Solution values together with the layout they live on.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: GridLayout,
    values: Vec<f64>,
}

impl StateVector {
    pub fn zeros(layout: GridLayout) -> Self {
        Self { layout, values: vec![0.0; layout.len()] }
    }

    pub fn from_vec(layout: GridLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} values for a layout with {} dofs",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    /// The `n_b` dofs of cell `index`.
    pub fn cell(&self, index: usize) -> Result<&[f64]> {
        let n_c = self.layout.n_cells();
        if index >= n_c {
            return Err(Error::OutOfRange { index, len: n_c });
        }
        let nb = self.layout.n_b();
        Ok(&self.values[index * nb..(index + 1) * nb])
    }

    pub(crate) fn check_same_layout(&self, other: &StateVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch(format!("{:?} vs {:?}", self.layout, other.layout)));
        }
        Ok(())
    }
}

/// Relative and absolute tolerances for error control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub rtol: f64,
    pub atol: f64,
}

impl ToleranceSpec {
    pub fn new(rtol: f64, atol: f64) -> Result<Self> {
        let tol = Self { rtol, atol };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !self.rtol.is_finite() {
            return Err(Error::InvalidArgument(format!("rtol must be > 0, got {}", self.rtol)));
        }
        if !(self.atol >= 0.0) || !self.atol.is_finite() {
            return Err(Error::InvalidArgument(format!("atol must be >= 0, got {}", self.atol)));
        }
        Ok(())
    }
}

/// Which weighted RMS norm measures error estimates and scales difference quotients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// One weight per degree of freedom.
    Component,
    /// One weight per cell, built from the cell RMS of the reference state.
    #[default]
    Cell,
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "component" => Ok(NormKind::Component),
            "cell" => Ok(NormKind::Cell),
            other => Err(Error::Config(format!("unknown norm '{other}'"))),
        }
    }
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            NormKind::Component => "component",
            NormKind::Cell => "cell",
        })
    }
}

/// Neumaier-compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| if x.abs() > m || x.is_nan() { x.abs() } else { m })
}

/// RMS of the `n_b` entries of one cell.
#[inline]
fn rms(cell: &[f64]) -> f64 {
    let s: f64 = cell.iter().map(|x| x * x).sum();
    (s / cell.len() as f64).sqrt()
}

/// Component-wise WRMS norm on raw slices.
pub fn wrms_component_slice(err: &[f64], reference: &[f64], tol: &ToleranceSpec) -> f64 {
    debug_assert_eq!(err.len(), reference.len());
    let mut acc = CompensatedSum::default();
    for (e, r) in err.iter().zip(reference) {
        let q = e / (tol.rtol * r.abs() + tol.atol);
        acc.add(q * q);
    }
    (acc.value() / err.len() as f64).sqrt()
}

/// Cell-wise WRMS norm on raw slices with `n_b` dofs per cell.
pub fn wrms_cellwise_slice(err: &[f64], reference: &[f64], n_b: usize, tol: &ToleranceSpec) -> f64 {
    debug_assert_eq!(err.len(), reference.len());
    let n_c = err.len() / n_b;
    let mut acc = CompensatedSum::default();
    for (ec, rc) in err.chunks_exact(n_b).zip(reference.chunks_exact(n_b)) {
        let w = tol.rtol * rms(rc) + tol.atol;
        let q = rms(ec) / w;
        acc.add(q * q);
    }
    (acc.value() / n_c as f64).sqrt()
}

/// Dispatch on [`NormKind`] for slices laid out on `layout`.
pub fn wrms_slice(kind: NormKind, layout: &GridLayout, err: &[f64], reference: &[f64], tol: &ToleranceSpec) -> f64 {
    match kind {
        NormKind::Component => wrms_component_slice(err, reference, tol),
        NormKind::Cell => wrms_cellwise_slice(err, reference, layout.n_b(), tol),
    }
}

/// `sqrt( (1/N) sum_i (err_i / (rtol |ref_i| + atol))^2 )`.
pub fn wrms_component(err: &StateVector, reference: &StateVector, tol: &ToleranceSpec) -> Result<f64> {
    err.check_same_layout(reference)?;
    Ok(wrms_component_slice(err.values(), reference.values(), tol))
}

/// Cell-grouped WRMS norm: each cell contributes
/// `(||err_cell||_C / (rtol ||ref_cell||_C + atol))^2`, averaged over cells.
pub fn wrms_cellwise(err: &StateVector, reference: &StateVector, tol: &ToleranceSpec) -> Result<f64> {
    err.check_same_layout(reference)?;
    Ok(wrms_cellwise_slice(err.values(), reference.values(), err.layout().n_b(), tol))
}

pub fn wrms(kind: NormKind, err: &StateVector, reference: &StateVector, tol: &ToleranceSpec) -> Result<f64> {
    match kind {
        NormKind::Component => wrms_component(err, reference, tol),
        NormKind::Cell => wrms_cellwise(err, reference, tol),
    }
}

/// RMS of the dofs of one cell.
pub fn cell_norm(u: &StateVector, cell_index: usize) -> Result<f64> {
    Ok(rms(u.cell(cell_index)?))
}
