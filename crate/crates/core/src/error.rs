use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation diverged at step {step}: {reason}")]
    SimulationDiverged { step: usize, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("calibration error: damage class {class} is empty in domain {domain}")]
    Calibration { class: u8, domain: String },

    #[error("corrupt dataset at {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("degenerate sigma: {0}")]
    DegenerateSigma(String),

    #[error("non-finite value in {term}")]
    Numeric { term: String },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("config hash mismatch for {}: expected {expected}, found {found}", .path.display())]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("i/o error at {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
