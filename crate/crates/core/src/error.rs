use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter space [{lo}, {hi}]: bounds must be finite with lo < hi")]
    InvalidSpace { lo: f64, hi: f64 },

    #[error("invalid arm: {0}")]
    InvalidArm(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported prior: {0}")]
    UnsupportedPrior(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
