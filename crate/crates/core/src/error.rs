use alloc::string::String;

/// Errors raised anywhere in the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("bandwidth tuning failed: {0}")]
    Tuning(String),
    #[error("normal estimation failed at boundary point {index}: {reason}")]
    Normal { index: usize, reason: String },
    #[error("ghost construction failed: {0}")]
    Ghost(String),
    #[error("linear solve failed: {reason} (residual {residual:e})")]
    Solve { reason: String, residual: f64 },
    #[error("eigen decomposition failed: {0}")]
    Eigen(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn arg(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
