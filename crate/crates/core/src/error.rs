use std::io;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad magic, unsupported version or otherwise malformed file contents.
    #[error("format error: {0}")]
    Format(String),
    /// Input that parses but violates a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// Non-finite values produced during numeric work.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A forward record used against a model that has since changed.
    #[error("stale forward record: recorded at version {recorded}, model is at version {current}")]
    StaleRecord { recorded: u64, current: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}
