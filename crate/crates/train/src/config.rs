use std::path::PathBuf;

use cascade_core::EnrichmentConfig;
use cascade_model::{ModelConfig, Placement};
use cascade_nn::AdamWConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

/// How the model weights are initialised before training.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Fresh,
    /// Copy an addition model checkpoint into the placed slices.
    FromAddition { path: PathBuf, placement: Placement },
}

/// Periodic restoration of donor weights during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Freeze {
    #[default]
    None,
    /// Recopy donor attention heads every `k` steps.
    AttentionEvery(u64),
    /// Recopy every donor tensor every `k` steps.
    AllEvery(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub data: EnrichmentConfig,
    pub batch_size: usize,
    pub total_steps: u64,
    pub optimizer: AdamWConfig,
    /// Stop once the all-digits loss stays below this for `stop_patience`
    /// consecutive steps.
    pub stop_loss: Option<f64>,
    pub stop_patience: u64,
    /// Write an intermediate checkpoint every this many steps.
    pub checkpoint_every: Option<u64>,
    /// Record per-answer-digit losses every this many steps.
    pub per_digit_every: u64,
    pub init: Init,
    pub freeze: Freeze,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            data: EnrichmentConfig::default(),
            batch_size: 64,
            total_steps: 40_000,
            optimizer: AdamWConfig::default(),
            stop_loss: Some(2e-8),
            stop_patience: 100,
            checkpoint_every: None,
            per_digit_every: 100,
            init: Init::Fresh,
            freeze: Freeze::None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(TrainError::InvalidConfig(m));
        self.model.validate()?;
        self.data.validate()?;
        if self.model.n_digits != self.data.n_digits {
            return fail(format!(
                "model n_digits {} differs from data n_digits {}",
                self.model.n_digits, self.data.n_digits
            ));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.total_steps == 0 {
            return fail("total_steps must be at least 1".into());
        }
        if self.per_digit_every == 0 || self.checkpoint_every == Some(0) {
            return fail("logging and checkpoint cadences must be positive".into());
        }
        if let Freeze::AttentionEvery(0) | Freeze::AllEvery(0) = self.freeze {
            return fail("freeze cadence must be positive".into());
        }
        if self.freeze != Freeze::None && self.init == Init::Fresh {
            return fail("freeze modes need a donor (init from_addition)".into());
        }
        Ok(())
    }
}
