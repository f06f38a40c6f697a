use cascade_core::{Answer, Layout, Question, TokenId};
use cascade_nn::{Tape, Tensor};

use crate::cache::{ActivationCache, LayerCache};
use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::forward::build_forward;
use crate::node::Patch;
use crate::params::{init_params, param_shapes, ModelParams};

/// A decoder-only transformer with `f32` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformer {
    pub config: ModelConfig,
    pub params: ModelParams<Tensor<f32>>,
}

/// Logits `[batch * t, vocab]` plus the activation cache when requested.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub logits: Tensor<f32>,
    pub cache: Option<ActivationCache>,
}

/// Result of greedy decoding: the raw answer tokens and, when they form a
/// well-formed answer, the decoded value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub tokens: Vec<TokenId>,
    pub answer: Option<Answer>,
}

pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl Transformer {
    /// A freshly initialised model.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config);
        Ok(Transformer { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ModelParams<Tensor<f32>>) -> Result<Self> {
        config.validate()?;
        let expected = param_shapes(&config);
        let refs = params.refs();
        if refs.len() != expected.len() {
            return Err(ModelError::InvalidConfig("parameter count mismatch".into()));
        }
        let names = ModelParams::<()>::names(config.n_layers);
        for ((t, shape), name) in refs.iter().zip(&expected).zip(&names) {
            if t.shape() != shape.as_slice() {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            if !t.all_finite() {
                return Err(ModelError::InvalidConfig(format!("{name} is not finite")));
            }
        }
        Ok(Transformer { config, params })
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.config.n_digits)
    }

    /// Runs `batch` sequences (row-major in `tokens`) with optional patches.
    pub fn run(
        &self,
        tokens: &[TokenId],
        batch: usize,
        patches: &[Patch],
        capture: bool,
    ) -> Result<ForwardResult> {
        let mut tape = Tape::<f32>::new();
        let vars = self.params.map(|t| tape.constant(t.clone()));
        let out = build_forward(&mut tape, &self.config, &vars, tokens, batch, patches)?;
        let cache = capture.then(|| ActivationCache {
            batch,
            seq_len: tokens.len() / batch,
            n_heads: self.config.n_heads,
            d_model: self.config.d_model,
            layers: out
                .layers
                .iter()
                .map(|lv| LayerCache {
                    resid_pre: tape.value(lv.resid_pre).clone(),
                    pattern: tape.value(lv.pattern).clone(),
                    head_out: tape.value(lv.head_out).clone(),
                    mlp_out: tape.value(lv.mlp_out).clone(),
                })
                .collect(),
            resid_final: tape.value(out.resid_final).clone(),
        });
        let logits = tape.value(out.logits).clone();
        if !logits.all_finite() {
            return Err(cascade_nn::NnError::NonFinite("logits".into()).into());
        }
        Ok(ForwardResult { logits, cache })
    }

    pub fn forward(&self, tokens: &[TokenId], batch: usize) -> Result<Tensor<f32>> {
        Ok(self.run(tokens, batch, &[], false)?.logits)
    }

    pub fn forward_with_cache(
        &self,
        tokens: &[TokenId],
        batch: usize,
    ) -> Result<(Tensor<f32>, ActivationCache)> {
        let out = self.run(tokens, batch, &[], true)?;
        Ok((out.logits, out.cache.expect("captured")))
    }

    pub fn forward_with_interventions(
        &self,
        tokens: &[TokenId],
        batch: usize,
        patches: &[Patch],
    ) -> Result<Tensor<f32>> {
        Ok(self.run(tokens, batch, patches, false)?.logits)
    }

    /// Greedy autoregressive decoding of the `n + 2` answer tokens.
    pub fn predict(&self, question: &Question) -> Result<Prediction> {
        Ok(self
            .predict_batch(std::slice::from_ref(question))?
            .remove(0))
    }

    pub fn predict_batch(&self, questions: &[Question]) -> Result<Vec<Prediction>> {
        if questions.is_empty() {
            return Ok(Vec::new());
        }
        let n = self.config.n_digits;
        if let Some(q) = questions.iter().find(|q| q.n_digits() != n) {
            return Err(ModelError::InvalidConfig(format!(
                "question {q} does not have {n} digits"
            )));
        }
        let layout = self.layout();
        let batch = questions.len();
        let mut rows: Vec<Vec<TokenId>> = questions.iter().map(|q| q.encode()).collect();
        for _ in 0..layout.answer_len() {
            let t = rows[0].len();
            let flat: Vec<TokenId> = rows.iter().flatten().copied().collect();
            let logits = self.forward(&flat, batch)?;
            for (b, row) in rows.iter_mut().enumerate() {
                row.push(argmax(logits.row(b * t + t - 1)));
            }
        }
        let q_len = layout.question_len();
        Ok(rows
            .into_iter()
            .map(|row| {
                let tokens = row[q_len..].to_vec();
                let answer = Answer::decode(&tokens, n).ok();
                Prediction { tokens, answer }
            })
            .collect())
    }

    /// Argmax answer tokens under teacher forcing. `tokens` holds full
    /// `3n + 4` sequences; all predicted tokens match the targets exactly
    /// when greedy decoding would reproduce the whole answer.
    pub fn teacher_forced_predictions(
        &self,
        tokens: &[TokenId],
        batch: usize,
    ) -> Result<Vec<Vec<TokenId>>> {
        let layout = self.layout();
        let seq = layout.seq_len();
        let input: Vec<TokenId> = tokens
            .chunks(seq)
            .flat_map(|r| r[..seq - 1].to_vec())
            .collect();
        let t = seq - 1;
        let logits = self.forward(&input, batch)?;
        Ok((0..batch)
            .map(|b| {
                layout
                    .loss_positions()
                    .map(|p| argmax(logits.row(b * t + p)))
                    .collect()
            })
            .collect())
    }
}
