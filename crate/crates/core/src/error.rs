use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("N*L = {0} is not below 2^62; subset sums could overflow")]
    OverflowRisk(u128),

    #[error("enumeration guard exceeded for {what}: {size} > {limit}")]
    GuardExceeded {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("invalid message: {0}")]
    InvalidMessage(String),

    #[error("no crossing of 1/2 in the swept range")]
    NoCrossing,

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
