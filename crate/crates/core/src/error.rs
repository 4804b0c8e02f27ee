use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: every mode needs at least {min} levels")]
    InvalidDimension { dim: usize, min: usize },

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("truncation too small: amplitude |{amplitude:.4}| needs at least {required} levels, got {dim}")]
    TruncationTooSmall { amplitude: f64, dim: usize, required: usize },

    #[error("operator is not hermitian (max |M - M^dag| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("state is not normalized (deviation {deviation:.3e})")]
    NotNormalized { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("solver accuracy lost: drift {drift:.3e} exceeds {limit:.1e}")]
    SolverAccuracy { drift: f64, limit: f64 },

    #[error("density matrix lost positivity at t = {time}: eigenvalue below {limit:.1e}")]
    PositivityViolation { time: f64, limit: f64 },

    #[error("projector rank {found} does not match code dimension {expected}")]
    RankMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {dim}")]
    OutOfRange { index: usize, dim: usize },
}
