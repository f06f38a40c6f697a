//! Schema-driven circuit analysis of trained arithmetic transformers:
//! useful-node discovery by ablation, attention profiles, PCA of node
//! outputs, interchange interventions, subtask tagging, constraint checks,
//! polysemanticity statistics and map rendering.

pub mod ablation;
pub mod analysis;
pub mod attention;
pub mod constraints;
pub mod error;
pub mod intervention;
pub mod maps;
pub mod pca;
pub mod poly;
pub mod probe;
pub mod run;
pub mod schema;
pub mod subtask;
pub mod tagging;

pub use ablation::{ablate_nodes, find_useful_nodes, Ablation, AblationMode, UsefulNodes};
pub use analysis::{analyze, Analysis, AnalysisConfig};
pub use attention::{attention_profile, AttentionMeans};
pub use constraints::{check_constraints, ConstraintKind, ConstraintReport, Status};
pub use error::{InterpError, Result};
pub use intervention::{
    interchange_intervention, interchange_rate, interchange_rate_captured, InterchangeStats,
};
pub use maps::{render_maps, Grid};
pub use pca::{pca, pca_captured, pca_node, PcaResult};
pub use poly::{inserted_nodes, node_usage, polysemanticity_report, PolysemanticityReport};
pub use probe::{PairSet, ProbeSet};
pub use run::NodeOutputs;
pub use schema::AlgorithmSchema;
pub use subtask::{Subtask, SubtaskKind};
pub use tagging::{tag_subtasks, SubtaskTag, TagConfig};
