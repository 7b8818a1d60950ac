use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] gpdm::Error),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error in {path} at line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

impl HarnessError {
    /// Stable short tag for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(e) => match e {
                gpdm::Error::Argument(_) => "argument",
                gpdm::Error::Tuning(_) => "tuning",
                gpdm::Error::Normal { .. } => "normal",
                gpdm::Error::Ghost(_) => "ghost",
                gpdm::Error::Solve { .. } => "solve",
                gpdm::Error::Eigen(_) => "eigen",
                gpdm::Error::Shape(_) => "shape",
            },
            Self::Io { .. } => "io",
            Self::Csv(_) => "csv",
            Self::Parse { .. } => "parse",
            Self::Config(_) => "config",
            Self::Argument(_) => "argument",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
