use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line search failed after {backtracks} backtracks at inner iteration {iteration} (delta = {delta:e}, residual = {residual:e})")]
    LineSearch {
        backtracks: usize,
        iteration: usize,
        delta: f64,
        residual: f64,
    },

    #[error("oracle rejected instance: {0}")]
    OracleSize(String),
}

pub type Result<T> = std::result::Result<T, Error>;
