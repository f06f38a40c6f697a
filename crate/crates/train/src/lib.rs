//! Training, transfer initialisation, freeze-reset variants, seed sweeps
//! and large-sample evaluation with exact binomial intervals.

pub mod config;
pub mod error;
pub mod evaluator;
pub mod stats;
pub mod sweep;
pub mod trainer;

pub use config::{Freeze, Init, TrainConfig};
pub use error::{Result, TrainError};
pub use evaluator::{
    complexity_histogram, evaluate, Answerer, CascadeAnswerer, EvalReport, Histogram, Tally,
};
pub use stats::clopper_pearson;
pub use sweep::{seed_sweep, SweepRun, SweepSummary};
pub use trainer::{
    digit_labels, freeze_reset_hook, init_from_addition, loss_inputs, train, train_from,
    write_outputs, StepRecord, TrainLog, TrainOutcome,
};
