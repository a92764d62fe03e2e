use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("fewer than two extrema: signal is a residual trend")]
    InsufficientExtrema,
    #[error("empty input: {0}")]
    Empty(String),
    #[error("undefined for this input: {0}")]
    Undefined(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

pub(crate) fn dim_err(what: &str, expected: usize, got: usize) -> Error {
    Error::Dimension(alloc::format!("{what}: expected {expected}, got {got}"))
}
