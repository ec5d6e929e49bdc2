use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Toeplitz specification: {0}")]
    BadSpec(String),

    #[error("correlation matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("kurtosis {0} outside the supported range [1, 5)")]
    BadKurtosis(f64),

    #[error("probability {0} outside the open interval (0, 1)")]
    BadProbability(f64),

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("scale must be positive, got {0}")]
    BadScale(f64),

    #[error("invalid pair pattern: {0}")]
    BadPattern(String),

    #[error("invalid argument: {0}")]
    BadArgument(String),

    #[error("empty sample")]
    EmptySample,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
