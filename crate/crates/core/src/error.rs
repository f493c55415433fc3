use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {what} (limit {limit})")]
    Capacity { what: String, limit: usize },

    #[error("numeric failure: {message} (residual estimate {estimate:e})")]
    Numeric { message: String, estimate: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("unresolved limit: {0}")]
    Unresolved(String),

    #[error("property check failed: {0}")]
    PropertyFailure(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ElfError {
    fn from(e: std::io::Error) -> Self {
        ElfError::Io(e.to_string())
    }
}

impl From<csv::Error> for ElfError {
    fn from(e: csv::Error) -> Self {
        ElfError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ElfError>;

pub(crate) fn invalid(msg: impl Into<String>) -> ElfError {
    ElfError::InvalidArgument(msg.into())
}
