use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurveyError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryPolicy {
    /// Attempts per prompt, including the first.
    pub max_attempts: u32,
    /// Delay before retry `i` is `backoff_ms * i`.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewayConfig {
    /// Base URL of a chat-completions style API, e.g.
    /// `https://gateway.example/v1`.
    pub base_url: String,
    /// Environment variable holding the bearer token. `None` sends no
    /// Authorization header.
    pub auth_env: Option<String>,
    pub models: Vec<String>,
    pub timeout_secs: f64,
    /// Models surveyed at the same time.
    pub max_concurrent: usize,
    pub retry: RetryPolicy,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            base_url: "http://127.0.0.1:8080/v1".into(),
            auth_env: Some("GATEWAY_API_KEY".into()),
            models: Vec::new(),
            timeout_secs: 60.0,
            max_concurrent: 4,
            retry: RetryPolicy::default(),
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            problems.push(format!(
                "timeout_secs must be positive, got {}",
                self.timeout_secs
            ));
        }
        if self.max_concurrent == 0 {
            problems.push("max_concurrent must be at least 1".into());
        }
        if self.retry.max_attempts == 0 {
            problems.push("retry.max_attempts must be at least 1".into());
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            problems.push(format!("base_url must be http(s), got {:?}", self.base_url));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            if !seen.insert(m) {
                problems.push(format!("model {m:?} listed twice"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SurveyError::Config(problems.join("; ")))
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}
