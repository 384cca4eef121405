use thiserror::Error;

/// Errors raised across the volume-line library.
#[derive(Debug, Error)]
pub enum IvlError {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates a structural invariant (overlap, length mismatch, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// The inputs are valid but produce a degenerate result (e.g. zero total importance).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A malformed dataset or transfer-function file.
    #[error("{0}")]
    Format(String),

    /// A pipeline run was abandoned between stages.
    #[error("pipeline run cancelled")]
    Cancelled,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = IvlError> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> IvlError {
    IvlError::Domain(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> IvlError {
    IvlError::Validation(msg.into())
}
