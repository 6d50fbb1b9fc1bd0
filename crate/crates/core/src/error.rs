use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("a shape needs at least one part")]
    EmptyShape,
    #[error("part sizes must be positive integers, got {0:?}")]
    InvalidPart(String),
    #[error("p must be at least 1 (or infinite), got {0}")]
    InvalidExponent(f64),
    #[error("threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} is out of the supported domain")]
    OutOfDomain(String),
    #[error("resource budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("channel is not subunital: minimum eigenvalue of I - sum K*K is {0:e}")]
    NotSubunital(f64),
    #[error("a does not bulk-embed in b: margin {margin} at p = {witness_p}")]
    NotBulkEmbeddable { margin: f64, witness_p: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
