//! Dense tensors, reverse-mode autodiff, AdamW and the warmup/cosine
//! learning-rate schedule.

pub mod error;
pub mod gradcheck;
pub mod optim;
pub mod scalar;
pub mod schedule;
pub mod tape;
pub mod tensor;

pub use error::{NnError, Result};
pub use optim::{AdamWConfig, OptimizerState};
pub use scalar::Scalar;
pub use schedule::Schedule;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
