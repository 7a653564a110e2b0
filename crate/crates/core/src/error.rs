use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Wrong matrix or frame dimensions.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    /// Bad magic, version, checksum or manifest syntax.
    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("truncated payload at frame {frame}: {source}")]
    Truncated {
        frame: usize,
        #[source]
        source: io::Error,
    },

    /// Predictions and dataset disagree on the set of recording ids.
    #[error("reconciliation error: missing ids {missing:?}, extra ids {extra:?}, duplicate ids {duplicate:?}")]
    Reconciliation {
        missing: Vec<usize>,
        extra: Vec<usize>,
        duplicate: Vec<usize>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
