//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or combination.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Shape or length mismatch between related inputs.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// An operation that needs data received an empty dataset.
    #[error("dataset is empty")]
    EmptyDataset,

    /// Attack fitting/evaluation needs both member and non-member records.
    #[error("records contain only one membership class")]
    SingleClass,

    /// A numeric argument is out of its valid range.
    #[error("invalid value: {0}")]
    InvalidValue(String),

    /// Malformed CSV content, located by 1-based file line.
    #[error("{}: line {line}: {message}", path.display())]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Malformed binary model/attack file.
    #[error("persisted model: {0}")]
    Persist(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
