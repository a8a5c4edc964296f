use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("singular coefficient: {0}")]
    SingularCoefficient(String),
    #[error("singular query: {0}")]
    SingularQuery(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("linear solver: {0}")]
    Linear(String),
    #[error("time step {step} failed: {reason} (relative residual {residual:e})")]
    Step {
        step: usize,
        reason: String,
        residual: f64,
    },
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("grids are not nested: {0}")]
    NonNested(String),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Domain(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
