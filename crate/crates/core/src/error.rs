use thiserror::Error;

/// Errors raised by the evaluators, the simulators and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate noise: the scalar channel needs a strictly positive noise variance")]
    DegenerateNoise,

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
