use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("sequence of length {len} exceeds context length {context}")]
    LengthOverflow { len: usize, context: usize },
    #[error("token id {0} is outside the vocabulary")]
    BadToken(usize),
    #[error("node {node} does not exist in this model")]
    BadNode { node: String },
    #[error("patch for {node} has {found} values, expected {expected}")]
    PatchDim {
        node: String,
        expected: usize,
        found: usize,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("weight transfer: {0}")]
    Transfer(String),
    #[error(transparent)]
    Nn(#[from] cascade_nn::NnError),
    #[error(transparent)]
    Arith(#[from] cascade_core::ArithError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
