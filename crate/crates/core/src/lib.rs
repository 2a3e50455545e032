//! Adaptive super-time-stepping, SSP and DIRK integrators for stiff parabolic
//! problems, with a benchmark harness for a variable-coefficient diffusion test.

// `!(x > 0.0)` checks are deliberate since they also reject NaN; kernels index several arrays in step
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod dirk;
pub mod domeig;
pub mod error;
pub mod problem;
pub mod ssp;
pub mod state;
pub mod sts;
pub mod timeloop;

pub use error::{Error, Result, StepFailure};
pub use problem::{DgProblem, Diffusivity, FdProblem, Rhs};
pub use state::{GridLayout, LayoutKind, NormKind, StateVector, ToleranceSpec};
