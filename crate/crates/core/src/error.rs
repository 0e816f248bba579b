use std::io;
use std::path::PathBuf;

/// Errors raised by the labelfuse library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    /// Malformed or unsupported file content.
    #[error("format error: {0}")]
    Format(String),
    /// Inputs whose dims, spacing or channel count disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Values outside the documented domain of an operation.
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by file access or file content rather than by
    /// the values handed to an operation.
    pub fn is_io_or_format(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
