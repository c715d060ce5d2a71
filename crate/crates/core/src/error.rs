use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Malformed input document. `field` is a dotted path into the document.
    #[error("ingest error in {path}: {field}: {message}")]
    Ingest {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("feature error: {0}")]
    Feature(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("join error: {0}")]
    Join(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("io error on {path}: {source}")]
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

    pub(crate) fn ingest(path: impl Into<PathBuf>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Ingest {
            path: path.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}
