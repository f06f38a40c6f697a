use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Transformer shape. `d_model` defaults to `n_heads * d_head` but may be
/// set independently, which lets models with different head counts share
/// a residual width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_digits: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_head: usize,
    pub d_model: usize,
    pub d_mlp: usize,
    pub vocab_size: usize,
    pub context_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::new(5, 2, 3, 64, 372001)
    }
}

impl ModelConfig {
    pub fn new(n_digits: usize, n_layers: usize, n_heads: usize, d_head: usize, seed: u64) -> Self {
        let d_model = n_heads * d_head;
        ModelConfig {
            n_digits,
            n_layers,
            n_heads,
            d_head,
            d_model,
            d_mlp: 4 * d_model,
            vocab_size: cascade_core::VOCAB_SIZE,
            context_len: 3 * n_digits + 4,
            seed,
        }
    }

    /// Overrides the residual width, keeping `d_mlp = 4 * d_model`.
    pub fn with_d_model(mut self, d_model: usize) -> Self {
        self.d_model = d_model;
        self.d_mlp = 4 * d_model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.n_digits == 0 {
            return fail("n_digits must be positive".into());
        }
        if self.n_layers == 0 || self.n_heads == 0 || self.d_head == 0 || self.d_mlp == 0 {
            return fail("layer, head and width counts must be positive".into());
        }
        if self.d_model == 0 || self.d_model % self.n_heads != 0 {
            return fail(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.vocab_size != cascade_core::VOCAB_SIZE {
            return fail(format!(
                "vocab_size must be {}, got {}",
                cascade_core::VOCAB_SIZE,
                self.vocab_size
            ));
        }
        if self.context_len < 3 * self.n_digits + 4 {
            return fail(format!(
                "context_len {} is shorter than 3n+4 = {}",
                self.context_len,
                3 * self.n_digits + 4
            ));
        }
        Ok(())
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        let (d, h, dh, m) = (self.d_model, self.n_heads, self.d_head, self.d_mlp);
        let per_layer = 4 * d + 4 * h * d * dh + d * m + m + m * d + d;
        self.vocab_size * d * 2 + self.context_len * d + 2 * d + self.n_layers * per_layer
    }
}
