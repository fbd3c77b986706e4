use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called with inputs violating its precondition.
    #[error("{0}")]
    Precondition(String),
    /// A numeric procedure failed (ill-conditioned fit, non-convergence).
    #[error("{0}")]
    Numeric(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
