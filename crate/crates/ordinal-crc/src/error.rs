use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] ordinal_crc_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("too few rows: {0}")]
    TooFewRows(String),
    #[error("target mean set size {target} unreachable: sizes span [{smallest}, {largest}] over feasible alpha")]
    Unreachable { target: f64, smallest: f64, largest: f64 },
    #[error("malformed {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 1 usage/config/data, 2 infeasible calibration,
    /// 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(ordinal_crc_core::Error::Infeasible { .. }) => 2,
            Error::Io { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }
}
