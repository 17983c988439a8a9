use std::io;

use thiserror::Error;

/// Errors produced anywhere in the recognition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// The caller violated an operation's precondition (bad shape, empty input, unknown symbol).
    #[error("usage error: {0}")]
    Usage(String),
    /// A computation produced or received a non-finite or degenerate value.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A configuration file, flag or checkpoint set was missing or inconsistent.
    #[error("config error: {0}")]
    Config(String),
    /// A binary or text file did not match its documented layout.
    #[error("format error: {0}")]
    Format(String),
    /// Training could not continue.
    #[error("training error: {0}")]
    Training(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
