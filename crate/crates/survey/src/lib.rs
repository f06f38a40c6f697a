//! Cascading-carry arithmetic survey of chat models: a fixed prompt suite
//! of increasing digit count, an HTTP client for chat-completions gateways,
//! response parsing and scoring, and a scripted local gateway.

pub mod client;
pub mod config;
pub mod error;
pub mod mock;
pub mod parse;
pub mod report;
pub mod suite;

pub use client::{run_survey, score, ChatAdapter, ChatCompletions, ModelResult, SurveyResults};
pub use config::{GatewayConfig, RetryPolicy};
pub use error::{Result, SurveyError};
pub use mock::{MockGateway, MockModel};
pub use parse::parse_response;
pub use report::{export_scores, write_results};
pub use suite::{PromptSuite, SurveyPrompt};
