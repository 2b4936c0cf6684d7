use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or configuration (exit code 2).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data is inconsistent with itself or with the graph (exit code 3).
    #[error("data integrity error: {0}")]
    Integrity(String),

    /// Malformed input file; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("unknown node {0}")]
    UnknownNode(usize),

    /// A metric is undefined for the given input (e.g. single-class labels).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite values during training (exit code 4).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid format: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io { .. } | Error::UndefinedMetric(_) => 2,
            Error::Numeric(_) => 4,
            Error::Integrity(_)
            | Error::Parse { .. }
            | Error::UnknownNode(_)
            | Error::Contract(_)
            | Error::Format { .. } => 3,
        }
    }
}
