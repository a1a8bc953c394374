use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation kernel and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its admissible range.
    #[error("configuration error: {0}")]
    Config(String),

    /// An input violates an operation's domain (limits, NaN, empty data).
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation was invoked in a state that does not allow it.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// A structured text file could not be parsed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
