//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid configuration: mismatched channel counts,
    /// even filter sizes, bad hyperparameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Incompatible tensor or image dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// Malformed or unsupported file contents.
    #[error("format error: {0}")]
    Format(String),

    /// Missing or unusable input data (empty directories, unreadable images).
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
