use std::path::Path;
use std::time::Instant;

use cascade_core::{gen_batch, Batch, Layout, TokenId};
use cascade_model::checkpoint::save_checkpoint;
use cascade_model::transfer::{copy_donor_into, Scope};
use cascade_model::{
    build_forward, load_checkpoint, transfer_weights, ModelConfig, Placement, Transformer,
};
use cascade_nn::{OptimizerState, Schedule, Tape};
use serde::{Deserialize, Serialize};

use crate::config::{Freeze, Init, TrainConfig};
use crate::error::{Result, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

/// Mean loss per answer token at one step, ordered as `digit_labels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerDigitRecord {
    pub step: u64,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    /// Mean all-digits loss over the last (up to) 100 steps.
    pub loss: f64,
    pub steps_run: u64,
    pub stopped_early: bool,
    pub wall_secs: f64,
}

/// Serialised as `training_loss.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub config: TrainConfig,
    pub seed: u64,
    pub digit_labels: Vec<String>,
    pub steps: Vec<StepRecord>,
    pub per_digit: Vec<PerDigitRecord>,
    #[serde(rename = "final")]
    pub final_: FinalRecord,
}

impl TrainLog {
    /// Equality ignoring wall-clock time.
    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        self.config == other.config
            && self.steps == other.steps
            && self.per_digit == other.per_digit
            && self.final_.loss == other.final_.loss
            && self.final_.steps_run == other.final_.steps_run
    }
}

pub struct TrainOutcome {
    pub model: Transformer,
    pub log: TrainLog,
}

/// Next-token inputs (each row without its last token) and targets that
/// are `Some` only at the answer-predicting positions.
pub fn loss_inputs(batch: &Batch) -> (Vec<TokenId>, Vec<Option<TokenId>>) {
    let layout = Layout::new(batch.n_digits);
    let seq = layout.seq_len();
    let t = seq - 1;
    let mut inputs = Vec::with_capacity(batch.len() * t);
    let mut targets = vec![None; batch.len() * t];
    for r in 0..batch.len() {
        let row = batch.row(r);
        inputs.extend_from_slice(&row[..t]);
        for p in layout.loss_positions() {
            targets[r * t + p] = Some(row[p + 1]);
        }
    }
    (inputs, targets)
}

/// Labels of the answer tokens in loss-position order: `SIGN`, `A{n}` .. `A0`.
pub fn digit_labels(n_digits: usize) -> Vec<String> {
    let layout = Layout::new(n_digits);
    layout
        .loss_positions()
        .map(|p| {
            layout
                .predicted_role(p)
                .expect("answer position")
                .to_string()
        })
        .collect()
}

/// Loads the donor checkpoint and copies it into a fresh target model.
pub fn init_from_addition(
    add_ckpt: &Path,
    target: &ModelConfig,
    placement: Placement,
) -> Result<(Transformer, Transformer)> {
    let donor = load_checkpoint(add_ckpt)?.model;
    let model = transfer_weights(&donor, target.clone(), placement)?;
    Ok((model, donor))
}

/// Restores donor slices when `step` is a positive multiple of the freeze
/// cadence. Returns whether anything was copied.
pub fn freeze_reset_hook(
    step: u64,
    model: &mut Transformer,
    donor: &Transformer,
    mode: Freeze,
    placement: Placement,
) -> Result<bool> {
    let (k, scope) = match mode {
        Freeze::None => return Ok(false),
        Freeze::AttentionEvery(k) => (k, Scope::Attention),
        Freeze::AllEvery(k) => (k, Scope::All),
    };
    if step == 0 || step % k != 0 {
        return Ok(false);
    }
    copy_donor_into(donor, model, placement, scope)?;
    Ok(true)
}

/// Trains from the configured initialisation. Intermediate checkpoints go
/// to `out_dir/checkpoints` when a cadence is set.
pub fn train(
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    progress: &mut dyn FnMut(&StepRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    match &cfg.init {
        Init::Fresh => train_from(
            cfg,
            Transformer::new(cfg.model.clone())?,
            None,
            out_dir,
            progress,
        ),
        Init::FromAddition { path, placement } => {
            let (model, donor) = init_from_addition(path, &cfg.model, *placement)?;
            train_from(cfg, model, Some((&donor, *placement)), out_dir, progress)
        }
    }
}

/// Core loop: `gen_batch` → forward → masked NLL → AdamW under the
/// warmup/cosine schedule, with optional freeze resets.
pub fn train_from(
    cfg: &TrainConfig,
    mut model: Transformer,
    donor: Option<(&Transformer, Placement)>,
    out_dir: Option<&Path>,
    progress: &mut dyn FnMut(&StepRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if model.config != cfg.model {
        return Err(TrainError::InvalidConfig(
            "initial model does not match the configured shape".into(),
        ));
    }
    if cfg.freeze != Freeze::None && donor.is_none() {
        return Err(TrainError::InvalidConfig(
            "freeze mode without a donor".into(),
        ));
    }
    let start = Instant::now();
    let layout = Layout::new(cfg.model.n_digits);
    let loss_positions: Vec<usize> = layout.loss_positions().collect();
    let t = layout.seq_len() - 1;
    let schedule = Schedule::new(cfg.optimizer.lr, cfg.total_steps);
    let mut params = model.params.clone().into_vec();
    let mut opt = OptimizerState::new(cfg.optimizer, &params);
    let mut steps = Vec::with_capacity(cfg.total_steps as usize);
    let mut per_digit = Vec::new();
    let mut below = 0u64;
    let mut stopped_early = false;

    for step in 0..cfg.total_steps {
        let batch = gen_batch(&cfg.data, cfg.batch_size, step);
        let (inputs, targets) = loss_inputs(&batch);
        let mut tape = Tape::<f32>::new();
        let vars: Vec<_> = params.iter().map(|p| tape.leaf(p.clone())).collect();
        let pvars = cascade_model::ModelParams::from_vec(cfg.model.n_layers, vars.clone())
            .expect("canonical parameter order");
        let out = build_forward(&mut tape, &cfg.model, &pvars, &inputs, batch.len(), &[])?;
        let (loss_var, per_row) = tape.cross_entropy(out.logits, &targets)?;
        let loss = tape.value(loss_var).item() as f64;
        if !loss.is_finite() {
            return Err(TrainError::Divergence { step, loss });
        }
        let mut grads = tape.backward(loss_var);
        let grads: Vec<_> = vars
            .iter()
            .zip(&params)
            .map(|(&v, p)| {
                grads
                    .take(v)
                    .unwrap_or_else(|| cascade_nn::Tensor::zeros(p.shape()))
            })
            .collect();
        let lr = schedule.lr_at(step);
        opt.step(&mut params, &grads, lr).map_err(|e| match e {
            cascade_nn::NnError::NonFinite(_) => TrainError::Divergence { step, loss },
            other => other.into(),
        })?;

        if step % cfg.per_digit_every == 0 || step + 1 == cfg.total_steps {
            let b = batch.len() as f64;
            let losses = loss_positions
                .iter()
                .map(|&p| {
                    (0..batch.len())
                        .map(|r| per_row[r * t + p] as f64)
                        .sum::<f64>()
                        / b
                })
                .collect();
            per_digit.push(PerDigitRecord { step, losses });
        }
        let record = StepRecord { step, loss, lr };
        progress(&record);
        steps.push(record);

        if let Some((donor, placement)) = donor {
            if cfg.freeze != Freeze::None {
                model.params = cascade_model::ModelParams::from_vec(cfg.model.n_layers, params)
                    .expect("canonical parameter order");
                freeze_reset_hook(step + 1, &mut model, donor, cfg.freeze, placement)?;
                params = model.params.clone().into_vec();
            }
        }
        if let (Some(every), Some(dir)) = (cfg.checkpoint_every, out_dir) {
            if (step + 1) % every == 0 {
                let snapshot = Transformer::from_params(
                    cfg.model.clone(),
                    cascade_model::ModelParams::from_vec(cfg.model.n_layers, params.clone())
                        .expect("canonical parameter order"),
                )?;
                let meta = serde_json::json!({ "step": step + 1 });
                save_checkpoint(
                    dir.join("checkpoints")
                        .join(format!("step_{}.ckpt", step + 1)),
                    &snapshot,
                    &meta,
                )?;
            }
        }
        if let Some(threshold) = cfg.stop_loss {
            below = if loss < threshold { below + 1 } else { 0 };
            if below >= cfg.stop_patience {
                stopped_early = step + 1 < cfg.total_steps;
                break;
            }
        }
    }

    model.params = cascade_model::ModelParams::from_vec(cfg.model.n_layers, params)
        .expect("canonical parameter order");
    let tail = steps.len().min(100);
    let final_loss = steps[steps.len() - tail..]
        .iter()
        .map(|s| s.loss)
        .sum::<f64>()
        / tail as f64;
    let log = TrainLog {
        config: cfg.clone(),
        seed: cfg.model.seed,
        digit_labels: digit_labels(cfg.model.n_digits),
        final_: FinalRecord {
            loss: final_loss,
            steps_run: steps.len() as u64,
            stopped_early,
            wall_secs: start.elapsed().as_secs_f64(),
        },
        steps,
        per_digit,
    };
    Ok(TrainOutcome { model, log })
}

/// Writes `model.ckpt` and `training_loss.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    outcome: &TrainOutcome,
    extra_metadata: serde_json::Value,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta = serde_json::json!({
        "train_config": outcome.log.config,
        "steps_run": outcome.log.final_.steps_run,
        "final_loss": outcome.log.final_.loss,
        "extra": extra_metadata,
    });
    save_checkpoint(dir.join("model.ckpt"), &outcome.model, &meta)?;
    std::fs::write(
        dir.join("training_loss.json"),
        serde_json::to_string_pretty(&outcome.log)?,
    )?;
    Ok(())
}
