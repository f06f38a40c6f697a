use std::collections::{BTreeMap, BTreeSet};

use cascade_core::{classify_complexity, oracle_eval, Answer, Quantum, Question, Role, TokenId};
use cascade_model::{NodeId, Patch, Transformer};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::probe::ProbeSet;
use crate::run::{mean_activations, predict_forced};

pub const DEFAULT_THRESHOLD: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// Replace with the node's mean output over a reference question set.
    #[default]
    Mean,
    /// Replace with zeros.
    Zero,
}

/// Replacement values for every node.
#[derive(Debug, Clone)]
pub struct Ablation {
    pub mode: AblationMode,
    d_model: usize,
    means: BTreeMap<NodeId, Vec<f32>>,
}

impl Ablation {
    pub fn mean(model: &Transformer, reference: &ProbeSet) -> Result<Self> {
        Ok(Ablation {
            mode: AblationMode::Mean,
            d_model: model.config.d_model,
            means: mean_activations(model, &reference.questions)?
                .into_iter()
                .collect(),
        })
    }

    pub fn zero(model: &Transformer) -> Self {
        Ablation {
            mode: AblationMode::Zero,
            d_model: model.config.d_model,
            means: BTreeMap::new(),
        }
    }

    pub fn patch(&self, node: NodeId) -> Patch {
        let value = match self.mode {
            AblationMode::Mean => self.means.get(&node).cloned(),
            AblationMode::Zero => None,
        };
        Patch {
            node,
            row: None,
            value: value.unwrap_or_else(|| vec![0.0; self.d_model]),
        }
    }
}

/// Per-question result of ablating a node set.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationOutcome {
    pub baseline_correct: Vec<bool>,
    /// Answer roles whose prediction is wrong under ablation.
    pub wrong_roles: Vec<Vec<Role>>,
}

impl AblationOutcome {
    /// Questions answered correctly before ablation and incorrectly after.
    pub fn failures(&self) -> Vec<usize> {
        (0..self.baseline_correct.len())
            .filter(|&i| self.baseline_correct[i] && !self.wrong_roles[i].is_empty())
            .collect()
    }
}

fn wrong_roles(model: &Transformer, predicted: &[TokenId], target: &[TokenId]) -> Vec<Role> {
    let layout = model.layout();
    layout
        .loss_positions()
        .zip(predicted.iter().zip(target))
        .filter(|(_, (p, t))| p != t)
        .filter_map(|(pos, _)| layout.predicted_role(pos))
        .collect()
}

fn baseline(model: &Transformer, rows: &[(Question, Answer)]) -> Result<Vec<bool>> {
    let pred = predict_forced(model, rows, &[])?;
    Ok(rows
        .iter()
        .zip(&pred)
        .map(|((_, a), p)| a.encode() == *p)
        .collect())
}

fn answered(questions: &[Question]) -> Vec<(Question, Answer)> {
    questions
        .iter()
        .map(|q| (q.clone(), oracle_eval(q)))
        .collect()
}

/// Ablates `nodes` together on `questions`.
pub fn ablate_nodes(
    model: &Transformer,
    questions: &[Question],
    nodes: &[NodeId],
    ablation: &Ablation,
) -> Result<AblationOutcome> {
    let rows = answered(questions);
    let baseline_correct = baseline(model, &rows)?;
    ablate_with_baseline(model, &rows, baseline_correct, nodes, ablation)
}

fn ablate_with_baseline(
    model: &Transformer,
    rows: &[(Question, Answer)],
    baseline_correct: Vec<bool>,
    nodes: &[NodeId],
    ablation: &Ablation,
) -> Result<AblationOutcome> {
    let patches: Vec<Patch> = nodes.iter().map(|&n| ablation.patch(n)).collect();
    let pred = predict_forced(model, rows, &patches)?;
    let wrong = rows
        .iter()
        .zip(&pred)
        .map(|((_, a), p)| wrong_roles(model, p, &a.encode()))
        .collect();
    Ok(AblationOutcome {
        baseline_correct,
        wrong_roles: wrong,
    })
}

/// Effect of ablating one node on a probe set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAblation {
    pub node: NodeId,
    pub fails: usize,
    pub fail_fraction: f64,
    /// Answer roles that went wrong on failing questions.
    pub impacts: BTreeSet<Role>,
    /// Simplest complexity quantum among failing questions.
    pub min_quantum: Option<Quantum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsefulNodes {
    pub purpose: String,
    pub mode: AblationMode,
    pub threshold: f64,
    pub probe_size: usize,
    pub baseline_correct: usize,
    pub nodes: BTreeMap<NodeId, NodeAblation>,
}

impl UsefulNodes {
    pub fn is_useful(&self, node: NodeId) -> bool {
        self.nodes
            .get(&node)
            .is_some_and(|a| a.fail_fraction >= self.threshold && a.fails > 0)
    }

    pub fn useful(&self) -> BTreeSet<NodeId> {
        self.nodes
            .keys()
            .copied()
            .filter(|&n| self.is_useful(n))
            .collect()
    }

    pub fn fail_fraction(&self, node: NodeId) -> f64 {
        self.nodes.get(&node).map_or(0.0, |a| a.fail_fraction)
    }
}

/// Ablates each node in turn and records the fraction of probe questions
/// that go from correct to incorrect.
pub fn find_useful_nodes(
    model: &Transformer,
    probe: &ProbeSet,
    ablation: &Ablation,
    threshold: f64,
) -> Result<UsefulNodes> {
    let rows = answered(&probe.questions);
    let baseline_correct = baseline(model, &rows)?;
    let n = rows.len().max(1) as f64;
    let t = model.layout().seq_len() - 1;
    let mut nodes = BTreeMap::new();
    for p in 0..t {
        for l in 0..model.config.n_layers {
            let sites = (0..model.config.n_heads)
                .map(|h| NodeId::head(p, l, h))
                .chain(std::iter::once(NodeId::mlp(p, l)));
            for node in sites {
                let out = ablate_with_baseline(
                    model,
                    &rows,
                    baseline_correct.clone(),
                    &[node],
                    ablation,
                )?;
                let failures = out.failures();
                let impacts = failures
                    .iter()
                    .flat_map(|&i| out.wrong_roles[i].iter().copied())
                    .collect();
                let min_quantum = failures
                    .iter()
                    .map(|&i| classify_complexity(&rows[i].0))
                    .min();
                nodes.insert(
                    node,
                    NodeAblation {
                        node,
                        fails: failures.len(),
                        fail_fraction: failures.len() as f64 / n,
                        impacts,
                        min_quantum,
                    },
                );
            }
        }
    }
    Ok(UsefulNodes {
        purpose: probe.purpose.clone(),
        mode: ablation.mode,
        threshold,
        probe_size: rows.len(),
        baseline_correct: baseline_correct.iter().filter(|&&c| c).count(),
        nodes,
    })
}
