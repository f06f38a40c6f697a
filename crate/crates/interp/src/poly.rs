use std::collections::{BTreeMap, BTreeSet};

use cascade_core::QuestionClass;
use cascade_model::transfer::Placement;
use cascade_model::{ModelConfig, NodeId, Site};
use serde::{Deserialize, Serialize};

use crate::ablation::UsefulNodes;
use crate::tagging::{tagged_nodes_by_class, SubtaskTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassUsage {
    pub class: QuestionClass,
    pub used: usize,
    /// Share of all used nodes.
    pub used_pct: f64,
    pub inserted_used: usize,
    /// Share of all used inserted nodes.
    pub inserted_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolysemanticityReport {
    /// Nodes used by at least one class.
    pub used: usize,
    /// Inserted nodes used by at least one class.
    pub inserted_used: usize,
    /// All nodes that received donor weights for a donor-used node.
    pub inserted: usize,
    pub classes: Vec<ClassUsage>,
    /// Nodes used by more than one class.
    pub polysemantic: usize,
    /// Inserted nodes used by a subtraction class.
    pub inserted_reused_for_subtraction: usize,
    /// `inserted_reused_for_subtraction / inserted`, 0 when nothing was inserted.
    pub reused_fraction: f64,
}

/// Nodes each class relies on: ablation-useful nodes plus tagged nodes.
pub fn node_usage(
    useful: &BTreeMap<QuestionClass, UsefulNodes>,
    tags: &[SubtaskTag],
) -> BTreeMap<QuestionClass, BTreeSet<NodeId>> {
    let mut usage: BTreeMap<QuestionClass, BTreeSet<NodeId>> =
        useful.iter().map(|(&c, u)| (c, u.useful())).collect();
    for (c, nodes) in tagged_nodes_by_class(tags) {
        if let Some(set) = usage.get_mut(&c) {
            set.extend(nodes);
        }
    }
    usage
}

/// Maps nodes of a donor model to the slots its weights were copied into.
pub fn inserted_nodes(
    donor_used: &BTreeSet<NodeId>,
    donor: &ModelConfig,
    target: &ModelConfig,
    placement: Placement,
) -> BTreeSet<NodeId> {
    let lo = placement.layer_offset(donor, target);
    let ho = placement.head_offset(donor, target);
    donor_used
        .iter()
        .map(|n| NodeId {
            position: n.position,
            layer: n.layer + lo,
            site: match n.site {
                Site::Head(h) => Site::Head(h + ho),
                Site::Mlp => Site::Mlp,
            },
        })
        .collect()
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

pub fn polysemanticity_report(
    usage: &BTreeMap<QuestionClass, BTreeSet<NodeId>>,
    inserted: &BTreeSet<NodeId>,
) -> PolysemanticityReport {
    let all: BTreeSet<NodeId> = usage.values().flatten().copied().collect();
    let inserted_used: BTreeSet<NodeId> = all.intersection(inserted).copied().collect();
    let classes = usage
        .iter()
        .map(|(&class, nodes)| {
            let ins = nodes.intersection(inserted).count();
            ClassUsage {
                class,
                used: nodes.len(),
                used_pct: pct(nodes.len(), all.len()),
                inserted_used: ins,
                inserted_pct: pct(ins, inserted_used.len()),
            }
        })
        .collect();
    let polysemantic = all
        .iter()
        .filter(|n| usage.values().filter(|s| s.contains(n)).count() > 1)
        .count();
    let sub: BTreeSet<NodeId> = usage
        .iter()
        .filter(|(c, _)| **c != QuestionClass::Add)
        .flat_map(|(_, s)| s.iter().copied())
        .collect();
    let reused = inserted.intersection(&sub).count();
    PolysemanticityReport {
        used: all.len(),
        inserted_used: inserted_used.len(),
        inserted: inserted.len(),
        classes,
        polysemantic,
        inserted_reused_for_subtraction: reused,
        reused_fraction: if inserted.is_empty() {
            0.0
        } else {
            reused as f64 / inserted.len() as f64
        },
    }
}

impl PolysemanticityReport {
    /// Rows in the order All, Addition, positive and negative subtraction.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,used,used_pct,inserted,inserted_pct\n");
        out.push_str(&format!("all,{},,{},\n", self.used, self.inserted_used));
        for c in &self.classes {
            out.push_str(&format!(
                "{},{},{:.0},{},{:.0}\n",
                c.class.name(),
                c.used,
                c.used_pct,
                c.inserted_used,
                c.inserted_pct
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(nodes: &[NodeId]) -> BTreeSet<NodeId> {
        nodes.iter().copied().collect()
    }

    #[test]
    fn fresh_model_has_no_inserted_nodes() {
        let usage = BTreeMap::from([
            (QuestionClass::Add, set(&[NodeId::head(5, 0, 0)])),
            (
                QuestionClass::SubPos,
                set(&[NodeId::head(5, 0, 0), NodeId::mlp(6, 1)]),
            ),
        ]);
        let r = polysemanticity_report(&usage, &BTreeSet::new());
        assert_eq!(r.inserted, 0);
        assert_eq!(r.inserted_used, 0);
        assert!(r.classes.iter().all(|c| c.inserted_used == 0));
        assert_eq!(r.used, 2);
        assert_eq!(r.polysemantic, 1);
    }

    #[test]
    fn node_used_by_three_classes_counts_once_per_class() {
        let n = NodeId::head(9, 0, 1);
        let usage: BTreeMap<_, _> = QuestionClass::ALL.iter().map(|&c| (c, set(&[n]))).collect();
        let r = polysemanticity_report(&usage, &set(&[n, NodeId::head(3, 0, 0)]));
        assert!(r
            .classes
            .iter()
            .all(|c| c.used == 1 && c.inserted_used == 1));
        assert_eq!(r.used, 1);
        assert_eq!(r.inserted_reused_for_subtraction, 1);
        assert_eq!(r.reused_fraction, 0.5);
    }
}
