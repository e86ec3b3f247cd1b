use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the enhancement library.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on shapes or parameters was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A named weight tensor is absent from the store.
    #[error("missing weight tensor `{0}`")]
    MissingWeight(String),

    /// A named weight tensor exists but has the wrong shape.
    #[error("weight tensor `{name}` has shape {found:?}, expected {expected:?}")]
    WeightShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    /// The binary weight container could not be parsed.
    #[error("malformed weight container at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// The image file is readable but not in a supported encoding.
    #[error("unsupported image format: {0}")]
    UnsupportedImage(String),

    /// The configuration file or a configuration value is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 for I/O failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
