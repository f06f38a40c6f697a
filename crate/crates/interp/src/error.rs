use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("pair violates the differ-only-in-subtask predicate: {0}")]
    BadPair(String),
    #[error("{0} is not an attention head")]
    NotAHead(String),
    #[error("invalid probe set: {0}")]
    Probe(String),
    #[error(transparent)]
    Model(#[from] cascade_model::ModelError),
    #[error(transparent)]
    Arith(#[from] cascade_core::ArithError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, InterpError>;
