use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::GatewayConfig;
use crate::error::Result;
use crate::parse::parse_response;
use crate::suite::{CheckedPrompt, PromptSuite};

/// Maps a prompt to a request body and a response body back to text.
pub trait ChatAdapter: Send + Sync {
    fn endpoint(&self, base_url: &str) -> String;
    fn request(&self, model: &str, prompt: &str) -> Value;
    fn response_text(&self, response: &Value) -> Option<String>;
    fn usage(&self, response: &Value) -> Usage;
}

/// The common `/chat/completions` shape.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChatCompletions;

impl ChatAdapter for ChatCompletions {
    fn endpoint(&self, base_url: &str) -> String {
        format!("{}/chat/completions", base_url.trim_end_matches('/'))
    }

    fn request(&self, model: &str, prompt: &str) -> Value {
        json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        })
    }

    fn response_text(&self, response: &Value) -> Option<String> {
        response["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
    }

    fn usage(&self, response: &Value) -> Usage {
        let u = &response["usage"];
        Usage {
            prompt_tokens: u["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: u["completion_tokens"].as_u64().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

/// One prompt sent to one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: String,
    pub digits: usize,
    pub expected: String,
    pub response: Option<String>,
    pub parsed: Option<String>,
    pub correct: bool,
    pub attempts: u32,
    pub error: Option<String>,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: String,
    /// Digit count of the last prompt in the unbroken run of correct
    /// answers from the first prompt; 0 when the first is wrong.
    pub score: usize,
    pub max_score: usize,
    pub usage: Usage,
    /// Network, HTTP or auth failure that ended the model's run.
    pub error: Option<String>,
    pub transcript: Vec<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResults {
    pub operation: String,
    /// Sorted by model id.
    pub models: Vec<ModelResult>,
}

enum CallError {
    /// Worth retrying: transport failures, 429 and 5xx.
    Transient(String),
    Fatal(String),
}

fn call(
    agent: &ureq::Agent,
    url: &str,
    token: Option<&str>,
    body: &Value,
) -> std::result::Result<Value, CallError> {
    let mut req = agent.post(url).set("Content-Type", "application/json");
    if let Some(t) = token {
        req = req.set("Authorization", &format!("Bearer {t}"));
    }
    match req.send_json(body) {
        Ok(resp) => resp
            .into_json::<Value>()
            .map_err(|e| CallError::Fatal(format!("unreadable response body: {e}"))),
        Err(ureq::Error::Status(code, resp)) => {
            let text = resp.into_string().unwrap_or_default();
            let msg = format!(
                "HTTP {code}: {}",
                text.chars().take(200).collect::<String>()
            );
            if code == 429 || code >= 500 {
                Err(CallError::Transient(msg))
            } else {
                Err(CallError::Fatal(msg))
            }
        }
        Err(e) => Err(CallError::Transient(e.to_string())),
    }
}

/// Scores the run of correct answers from the first prompt.
pub fn score(correct: &[bool], digits: &[usize]) -> usize {
    correct
        .iter()
        .zip(digits)
        .take_while(|(&ok, _)| ok)
        .last()
        .map_or(0, |(_, &d)| d)
}

fn survey_model(
    cfg: &GatewayConfig,
    adapter: &dyn ChatAdapter,
    agent: &ureq::Agent,
    token: std::result::Result<Option<&str>, String>,
    model: &str,
    prompts: &[CheckedPrompt],
) -> ModelResult {
    let max_score = prompts.last().map_or(0, |p| p.digits);
    let mut result = ModelResult {
        model: model.to_string(),
        score: 0,
        max_score,
        usage: Usage::default(),
        error: None,
        transcript: Vec::new(),
    };
    let token = match token {
        Ok(t) => t,
        Err(e) => {
            result.error = Some(e);
            return result;
        }
    };
    let url = adapter.endpoint(&cfg.base_url);
    for p in prompts {
        let body = adapter.request(model, &p.prompt);
        let started = Instant::now();
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            match call(agent, &url, token, &body) {
                Ok(v) => break Ok(v),
                Err(CallError::Transient(_)) if attempts < cfg.retry.max_attempts => {
                    std::thread::sleep(Duration::from_millis(
                        cfg.retry.backoff_ms * attempts as u64,
                    ));
                }
                Err(CallError::Transient(e)) | Err(CallError::Fatal(e)) => break Err(e),
            }
        };
        let latency_ms = started.elapsed().as_millis() as u64;
        let mut ex = Exchange {
            prompt: p.prompt.clone(),
            digits: p.digits,
            expected: p.expected.to_string(),
            response: None,
            parsed: None,
            correct: false,
            attempts,
            error: None,
            latency_ms,
        };
        match outcome {
            Ok(v) => {
                result.usage += adapter.usage(&v);
                ex.response = adapter.response_text(&v);
                if ex.response.is_none() {
                    ex.error = Some("response has no message text".into());
                }
                let parsed: Option<BigInt> = ex.response.as_deref().and_then(parse_response);
                ex.correct = parsed.as_ref() == Some(&p.expected);
                ex.parsed = parsed.map(|v| v.to_string());
            }
            Err(e) => {
                ex.error = Some(e.clone());
                result.error = Some(e);
            }
        }
        let ok = ex.correct;
        result.transcript.push(ex);
        if !ok {
            break;
        }
        result.score = p.digits;
    }
    result
}

/// Sends each model the suite's prompts in order, stopping at its first
/// wrong answer. Models run concurrently up to `max_concurrent`; failures
/// are recorded per model.
pub fn run_survey(
    cfg: &GatewayConfig,
    suite: &PromptSuite,
    adapter: &dyn ChatAdapter,
) -> Result<SurveyResults> {
    cfg.validate()?;
    let prompts = suite.checked()?;
    let token_value = cfg
        .auth_env
        .as_ref()
        .map(|var| std::env::var(var).map_err(|_| format!("auth token variable {var} is not set")));
    let token = || -> std::result::Result<Option<&str>, String> {
        match &token_value {
            None => Ok(None),
            Some(Ok(t)) => Ok(Some(t.as_str())),
            Some(Err(e)) => Err(e.clone()),
        }
    };
    let agent = ureq::AgentBuilder::new().timeout(cfg.timeout()).build();
    let mut models = cfg.models.clone();
    models.sort();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<ModelResult>>> = Mutex::new(vec![None; models.len()]);
    std::thread::scope(|s| {
        for _ in 0..cfg.max_concurrent.min(models.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(model) = models.get(i) else {
                    break;
                };
                let r = survey_model(cfg, adapter, &agent, token(), model, &prompts);
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    Ok(SurveyResults {
        operation: suite.operation.clone(),
        models: results
            .into_inner()
            .expect("workers finished")
            .into_iter()
            .map(|r| r.expect("every model surveyed"))
            .collect(),
    })
}
