use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: u64, loss: f64 },
    #[error(transparent)]
    Model(#[from] cascade_model::ModelError),
    #[error(transparent)]
    Nn(#[from] cascade_nn::NnError),
    #[error(transparent)]
    Arith(#[from] cascade_core::ArithError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;
