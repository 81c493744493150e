use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("expected {expected} values, got {actual}")]
    ValueCount { expected: usize, actual: usize },

    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },

    #[error("multiplier is not finite at flat spectral index {index}")]
    NonFiniteMultiplier { index: usize },

    #[error("invalid physical parameters: {0}")]
    InvalidParameters(String),

    #[error(
        "inadmissible wave parameters: omega = {omega} must exceed sigma*|c|^2/4 = {threshold}"
    )]
    InadmissibleParameters { omega: f64, threshold: f64 },

    #[error("potential energy N = {n:e} is numerically zero (Lqc = {lqc:e}); cannot rescale onto the Nehari manifold")]
    DegenerateNonlinearity { n: f64, lqc: f64 },

    #[error("energy level must be positive, got {0}")]
    NonpositiveLevel(f64),

    #[error("rescaling loses resolution: {mass:e} of the L2 mass is aliased or cut off")]
    ResolutionLoss { mass: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("domain too small: tail mass {tail_mass:e}")]
    DomainTooSmall { tail_mass: f64 },

    #[error("operation requires dimension {expected}, got {actual}")]
    WrongDimension { expected: String, actual: usize },

    #[error("state became non-finite at t = {time}")]
    NonFinite { time: f64 },

    #[error("decay fit window contains no usable points")]
    FitWindowEmpty,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Whether the failure is numerical (as opposed to bad user input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::DomainTooSmall { .. }
                | Error::NonFinite { .. }
                | Error::DegenerateNonlinearity { .. }
                | Error::ResolutionLoss { .. }
                | Error::FitWindowEmpty
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
