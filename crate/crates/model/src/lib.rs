//! Decoder-only transformer for n-digit arithmetic with activation capture,
//! per-node interventions, weight transfer and a binary checkpoint format.

pub mod cache;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod forward;
pub mod model;
pub mod node;
pub mod params;
pub mod transfer;

pub use cache::{ActivationCache, LayerCache};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::ModelConfig;
pub use error::{ModelError, Result};
pub use forward::{build_forward, ForwardVars, LayerVars};
pub use model::{argmax, ForwardResult, Prediction, Transformer};
pub use node::{NodeId, Patch, Site};
pub use params::{init_params, param_shapes, LayerParams, ModelParams};
pub use transfer::{transfer_weights, Placement};
