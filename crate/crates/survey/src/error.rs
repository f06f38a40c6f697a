use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("invalid gateway config: {0}")]
    Config(String),
    #[error("invalid prompt suite: {0}")]
    Suite(String),
    #[error(transparent)]
    Arith(#[from] cascade_core::ArithError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SurveyError>;
