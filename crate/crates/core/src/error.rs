use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or configuration supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// Array shapes that do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An index or count outside its admissible range.
    #[error("out of range: {0}")]
    Range(String),

    /// The requested physical setup cannot be realized.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Input data that cannot be analysed (silent regions, degenerate kernels, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed file contents.
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by what the user asked for rather than by the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
