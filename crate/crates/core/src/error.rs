use thiserror::Error;

/// Errors raised by the integrators, problems and benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("dense oracle refused: {n} unknowns exceeds guard {limit}")]
    SizeGuard { n: usize, limit: usize },

    #[error("power iteration failed: {0}")]
    PowerIteration(String),

    #[error("dominant eigenvalue {0} is positive; the spectrum must be non-positive")]
    PositiveEigenvalue(f64),

    #[error("stage count {required} exceeds cap {cap}; reduce the step size")]
    StageCap { required: usize, cap: usize },

    #[error("step failure: {0}")]
    StepFailure(StepFailure),

    #[error("integration aborted at t = {t}: {reason}")]
    Aborted { t: f64, reason: String },

    #[error("conjugate gradient: {0}")]
    Cg(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Reasons a single trial step could not produce a usable result.
///
/// These are recoverable: the time loop responds by shrinking `h`.
#[derive(Debug, Clone, PartialEq)]
pub enum StepFailure {
    NonFinite,
    NewtonDiverged { iters: usize },
    LinearSolver(String),
}

impl std::fmt::Display for StepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepFailure::NonFinite => write!(f, "non-finite stage value"),
            StepFailure::NewtonDiverged { iters } => {
                write!(f, "newton did not converge in {iters} iterations")
            }
            StepFailure::LinearSolver(msg) => write!(f, "linear solver: {msg}"),
        }
    }
}

impl From<StepFailure> for Error {
    fn from(f: StepFailure) -> Self {
        Error::StepFailure(f)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
