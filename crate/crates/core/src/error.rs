use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Unsupported or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Caller violated an interface precondition (wrong lengths, ranges).
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical error: {what} (residual {residual:.3e})")]
    Numerical { what: String, residual: f64 },
    #[error("coder error at symbol {position}: {reason}")]
    Coder { position: usize, reason: String },
    #[error("decode error at position {position}: {reason}")]
    Decode { position: usize, reason: String },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
