use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("basis error: {0}")]
    Basis(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("insufficient data: need at least {needed} usable points, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("domain error: {message} (offending samples: {offending:?})")]
    Domain { message: String, offending: Vec<usize> },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("memory estimate of {required} bytes exceeds the cap of {cap} bytes")]
    MemoryCap { required: u64, cap: u64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("sweep failed for every value")]
    SweepFailed,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::MemoryCap { .. } => 2,
            Error::Io { .. } | Error::Format { .. } | Error::Checkpoint(_) => 4,
            _ => 3,
        }
    }
}
