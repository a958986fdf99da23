use thiserror::Error;

/// Errors raised by the simulator's protocol operations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("primary key too short: {len} bits, need at least {min}")]
    KeyTooShort { len: usize, min: usize },

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
