use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{0}")]
    InvalidShape(String),
    #[error("target id {target} outside vocabulary of size {vocab}")]
    TargetOutOfRange { target: usize, vocab: usize },
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite value detected in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, NnError>;
