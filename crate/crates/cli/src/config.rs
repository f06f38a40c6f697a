use std::path::{Path, PathBuf};

use cascade_core::{Curriculum, EnrichmentConfig, QuestionClass};
use cascade_interp::{AlgorithmSchema, AnalysisConfig};
use cascade_model::ModelConfig;
use cascade_nn::AdamWConfig;
use cascade_survey::GatewayConfig;
use cascade_train::{Freeze, Init, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub total_steps: u64,
    pub optimizer: AdamWConfig,
    pub stop_loss: Option<f64>,
    pub stop_patience: u64,
    pub checkpoint_every: Option<u64>,
    pub per_digit_every: u64,
    pub init: Init,
    pub freeze: Freeze,
    /// Parallel runs in `sweep-seeds`.
    pub sweep_workers: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            batch_size: t.batch_size,
            total_steps: t.total_steps,
            optimizer: t.optimizer,
            stop_loss: t.stop_loss,
            stop_patience: t.stop_patience,
            checkpoint_every: t.checkpoint_every,
            per_digit_every: t.per_digit_every,
            init: t.init,
            freeze: t.freeze,
            sweep_workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub n_questions: u64,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            n_questions: 1_000_000,
            seed: 372001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpSection {
    pub analysis: AnalysisConfig,
    /// Algorithm schema file; the built-in addition or mixed schema when
    /// absent, chosen by the data curriculum.
    pub schema: Option<PathBuf>,
}

impl Default for InterpSection {
    fn default() -> Self {
        InterpSection {
            analysis: AnalysisConfig {
                seed: 372001,
                ..AnalysisConfig::default()
            },
            schema: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurveySection {
    pub gateway: GatewayConfig,
    /// Prompt suite file; the built-in 12-prompt addition suite when
    /// absent.
    pub suite: Option<PathBuf>,
}

impl Default for SurveySection {
    fn default() -> Self {
        SurveySection {
            gateway: GatewayConfig::default(),
            suite: None,
        }
    }
}

/// Everything a command needs, in one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub model: ModelConfig,
    pub data: EnrichmentConfig,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub interp: InterpSection,
    pub survey: SurveySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        RunConfig {
            version: CONFIG_VERSION,
            data: EnrichmentConfig::new(model.n_digits, Curriculum::add_only(), model.seed),
            model,
            train: TrainSection::default(),
            eval: EvalSection::default(),
            interp: InterpSection::default(),
            survey: SurveySection::default(),
        }
    }
}

/// Dotted paths of keys in `given` that `known` lacks. Only objects present
/// on both sides are compared, so enum payloads are left to the decoder.
fn unknown_keys(given: &Value, known: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Value::Object(g), Value::Object(k)) = (given, known) else {
        return;
    };
    for (key, value) in g {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match k.get(key) {
            None => out.push(format!("unknown key {path}")),
            Some(default) => unknown_keys(value, default, &path, out),
        }
    }
}

impl RunConfig {
    /// Parses a config document, reporting every unknown key at once.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        let known = serde_json::to_value(RunConfig::default())?;
        let mut problems = Vec::new();
        unknown_keys(&value, &known, "", &mut problems);
        if !problems.is_empty() {
            return Err(CliError::Config(problems));
        }
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.version != CONFIG_VERSION {
            problems.push(format!(
                "version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        if let Err(e) = self.model.validate() {
            problems.push(format!("model: {e}"));
        }
        if let Err(e) = self.data.validate() {
            problems.push(format!("data: {e}"));
        }
        if let Err(e) = self.train_config().validate() {
            problems.push(format!("train: {e}"));
        }
        if self.train.sweep_workers == 0 {
            problems.push("train.sweep_workers must be at least 1".into());
        }
        if self.eval.n_questions == 0 {
            problems.push("eval.n_questions must be positive".into());
        }
        if let Err(e) = self.survey.gateway.validate() {
            problems.push(format!("survey.gateway: {e}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems))
        }
    }

    /// Sets every seed in the document.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.model.seed = seed;
        self.data.seed = seed;
        self.eval.seed = seed;
        self.interp.analysis.seed = seed;
        self
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            model: self.model.clone(),
            data: self.data.clone(),
            batch_size: t.batch_size,
            total_steps: t.total_steps,
            optimizer: t.optimizer.clone(),
            stop_loss: t.stop_loss,
            stop_patience: t.stop_patience,
            checkpoint_every: t.checkpoint_every,
            per_digit_every: t.per_digit_every,
            init: t.init.clone(),
            freeze: t.freeze,
        }
    }

    /// Question classes the curriculum trains on.
    pub fn classes(&self) -> Vec<QuestionClass> {
        let c = self.data.curriculum;
        let mut out = Vec::new();
        if c.add > 0.0 {
            out.push(QuestionClass::Add);
        }
        if c.sub > 0.0 {
            out.extend([QuestionClass::SubPos, QuestionClass::SubNeg]);
        }
        out
    }

    pub fn schema(&self) -> Result<AlgorithmSchema> {
        Ok(match &self.interp.schema {
            Some(path) => AlgorithmSchema::load(path)?,
            None if self.data.curriculum.sub > 0.0 => AlgorithmSchema::mixed(),
            None => AlgorithmSchema::addition(),
        })
    }
}
