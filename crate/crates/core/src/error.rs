use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("truncation too large for the Fock oracle: n_max = {0} (limit {limit})", limit = crate::source::FOCK_ORACLE_MAX_N)]
    TruncationTooLarge(usize),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
