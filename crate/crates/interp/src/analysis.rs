use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use cascade_core::QuestionClass;
use cascade_model::{ModelConfig, NodeId, Transformer};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ablation::{find_useful_nodes, Ablation, AblationMode, UsefulNodes, DEFAULT_THRESHOLD};
use crate::attention::AttentionMeans;
use crate::constraints::{check_constraints, ConstraintReport};
use crate::error::Result;
use crate::maps::{render_maps, Grid};
use crate::probe::ProbeSet;
use crate::schema::AlgorithmSchema;
use crate::tagging::{tag_subtasks, ClassEvidence, SubtaskTag, TagConfig};

pub const FACTS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Questions per class in the ablation probe.
    pub probe_size: usize,
    /// Questions in the mean-ablation reference set.
    pub reference_size: usize,
    pub ablation: AblationMode,
    pub threshold: f64,
    pub tagging: TagConfig,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            probe_size: 500,
            reference_size: 10_000,
            ablation: AblationMode::Mean,
            threshold: DEFAULT_THRESHOLD,
            tagging: TagConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassAnalysis {
    pub useful: UsefulNodes,
    pub attention: AttentionMeans,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub config: ModelConfig,
    pub schema: AlgorithmSchema,
    pub classes: BTreeMap<QuestionClass, ClassAnalysis>,
    pub tags: Vec<SubtaskTag>,
    pub constraints: ConstraintReport,
}

/// Ablation, attention, tagging and constraint checking for the question
/// classes the model answers.
pub fn analyze(
    model: &Transformer,
    schema: &AlgorithmSchema,
    classes: &[QuestionClass],
    cfg: &AnalysisConfig,
) -> Result<Analysis> {
    let n = model.config.n_digits;
    let sub_fraction = if classes.iter().any(|&c| c != QuestionClass::Add) {
        if classes.contains(&QuestionClass::Add) {
            0.8
        } else {
            1.0
        }
    } else {
        0.0
    };
    let ablation = match cfg.ablation {
        AblationMode::Mean => Ablation::mean(
            model,
            &ProbeSet::reference(n, sub_fraction, cfg.reference_size, cfg.seed),
        )?,
        AblationMode::Zero => Ablation::zero(model),
    };
    let mut per_class = BTreeMap::new();
    for &class in classes {
        let probe = ProbeSet::class_probe(n, class, cfg.probe_size, cfg.seed);
        let useful = find_useful_nodes(model, &probe, &ablation, cfg.threshold)?;
        let attention = AttentionMeans::compute(model, &probe.questions)?;
        per_class.insert(class, ClassAnalysis { useful, attention });
    }
    let evidence: BTreeMap<QuestionClass, ClassEvidence<'_>> = per_class
        .iter()
        .map(|(&c, a)| {
            (
                c,
                ClassEvidence {
                    useful: &a.useful,
                    attention: &a.attention,
                },
            )
        })
        .collect();
    let mut tag_cfg = cfg.tagging.clone();
    tag_cfg.seed ^= cfg.seed;
    let tags = tag_subtasks(model, schema, &evidence, &tag_cfg)?;
    let constraints = check_constraints(&tags, schema, model.layout())?;
    Ok(Analysis {
        config: model.config.clone(),
        schema: schema.clone(),
        classes: per_class,
        tags,
        constraints,
    })
}

fn class_key(c: QuestionClass) -> String {
    c.prefix().to_string()
}

fn round(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl Analysis {
    pub fn useful_by_class(&self) -> BTreeMap<QuestionClass, UsefulNodes> {
        self.classes
            .iter()
            .map(|(&c, a)| (c, a.useful.clone()))
            .collect()
    }

    pub fn used_nodes(&self) -> BTreeSet<NodeId> {
        self.classes
            .values()
            .flat_map(|a| a.useful.useful())
            .collect()
    }

    /// Model-agnostic facts: attention targets, fail fractions and impacts
    /// of every used node.
    pub fn behaviors(&self) -> Value {
        let nodes: Vec<Value> = self
            .used_nodes()
            .into_iter()
            .map(|node| {
                let mut attends = BTreeMap::new();
                let mut fails = BTreeMap::new();
                let mut impacts = BTreeMap::new();
                let mut quanta = BTreeMap::new();
                for (&c, a) in &self.classes {
                    let key = class_key(c);
                    if node.is_head() {
                        let profile: Vec<Value> = a
                            .attention
                            .profile(node)
                            .unwrap_or_default()
                            .into_iter()
                            .map(|(r, w)| json!([r.to_string(), round(w)]))
                            .collect();
                        attends.insert(key.clone(), profile);
                    }
                    if let Some(ab) = a.useful.nodes.get(&node) {
                        fails.insert(key.clone(), round(ab.fail_fraction));
                        let roles: Vec<String> = ab.impacts.iter().map(|r| r.to_string()).collect();
                        impacts.insert(key.clone(), roles);
                        if let Some(q) = ab.min_quantum {
                            quanta.insert(key, q.to_string());
                        }
                    }
                }
                json!({
                    "node": node.to_string(),
                    "attends": attends,
                    "fail_fraction": fails,
                    "impacts": impacts,
                    "min_quantum": quanta,
                })
            })
            .collect();
        json!({
            "schema_version": FACTS_SCHEMA_VERSION,
            "model": self.model_json(),
            "threshold": self.classes.values().next().map(|a| a.useful.threshold),
            "nodes": nodes,
        })
    }

    /// Arithmetic-specific facts: subtask tags with their evidence and the
    /// constraint report.
    pub fn features(&self) -> Value {
        let tags: Vec<Value> = self
            .tags
            .iter()
            .map(|t| {
                let e = &t.evidence;
                json!({
                    "node": t.node.to_string(),
                    "partners": t.partners.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
                    "subtask": t.subtask().to_string(),
                    "attention": e.attention.iter().map(|(r, w)| json!([r.to_string(), round(*w)])).collect::<Vec<_>>(),
                    "window": [e.window.0, e.window.1],
                    "pca_cluster_score": e.pca.as_ref().map(|p| round(p.cluster_score)),
                    "pca_evr": e.pca.as_ref().map(|p| p.evr.iter().map(|&x| round(x)).collect::<Vec<_>>()),
                    "pca_tri_score": e.pca.as_ref().and_then(|p| p.tri_score).map(round),
                    "intervention_rate": e.intervention.as_ref().map(|s| round(s.rate)),
                    "intervention_pairs": e.intervention.as_ref().map(|s| s.n_pairs),
                    "fail_fraction": round(e.fail_fraction),
                    "low_confidence": e.low_confidence,
                })
            })
            .collect();
        json!({
            "schema_version": FACTS_SCHEMA_VERSION,
            "model": self.model_json(),
            "algorithm": self.schema.name,
            "tags": tags,
            "constraints": self.constraints.results,
        })
    }

    fn model_json(&self) -> Value {
        json!({
            "n_digits": self.config.n_digits,
            "n_layers": self.config.n_layers,
            "n_heads": self.config.n_heads,
            "d_model": self.config.d_model,
        })
    }

    pub fn maps(&self) -> Vec<Grid> {
        let useful = self
            .classes
            .iter()
            .map(|(&c, a)| (class_key(c), a.useful.clone()))
            .collect();
        render_maps(&self.config, &self.tags, &useful)
    }

    /// Writes behaviors.json, features.json and the map grids.
    pub fn emit_facts(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut b = serde_json::to_string_pretty(&self.behaviors())?;
        b.push('\n');
        std::fs::write(dir.join("behaviors.json"), b)?;
        let mut f = serde_json::to_string_pretty(&self.features())?;
        f.push('\n');
        std::fs::write(dir.join("features.json"), f)?;
        for g in self.maps() {
            g.write(&dir.join("maps"))?;
        }
        Ok(())
    }
}
