use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Arith(#[from] cascade_core::ArithError),
    #[error(transparent)]
    Model(#[from] cascade_model::ModelError),
    #[error(transparent)]
    Train(#[from] cascade_train::TrainError),
    #[error(transparent)]
    Interp(#[from] cascade_interp::InterpError),
    #[error(transparent)]
    Survey(#[from] cascade_survey::SurveyError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
            CliError::Arith(_) => "arith",
            CliError::Model(_) => "model",
            CliError::Train(_) => "train",
            CliError::Interp(_) => "interp",
            CliError::Survey(_) => "survey",
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> Value {
        let details = match self {
            CliError::Config(problems) => problems.clone(),
            _ => Vec::new(),
        };
        json!({"error": self.kind(), "message": self.to_string(), "details": details})
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
