use thiserror::Error;

/// Errors raised by the channel, eavesdropper and key-exchange layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter set violates its invariants (bad resistor order, zero variance, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was called with inputs outside its preconditions.
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
