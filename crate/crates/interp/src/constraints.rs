use std::collections::BTreeMap;

use cascade_core::Layout;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::schema::AlgorithmSchema;
use crate::subtask::Subtask;
use crate::tagging::SubtaskTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Coverage,
    Window,
    Ordering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// An ordering whose two sides are not both tagged.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResult {
    pub kind: ConstraintKind,
    pub constraint: String,
    pub status: Status,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub results: Vec<ConstraintResult>,
}

impl ConstraintReport {
    pub fn failures(&self) -> Vec<&ConstraintResult> {
        self.results
            .iter()
            .filter(|r| r.status == Status::Fail)
            .collect()
    }

    pub fn all_passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// True when no ordering or window constraint failed.
    pub fn placement_passed(&self) -> bool {
        self.failures()
            .iter()
            .all(|r| r.kind == ConstraintKind::Coverage)
    }

    pub fn count(&self, kind: ConstraintKind, status: Status) -> usize {
        self.results
            .iter()
            .filter(|r| r.kind == kind && r.status == status)
            .count()
    }
}

/// Evaluates coverage of required subtasks, each tag's position window and
/// every instantiated ordering. An ordering holds when some tagged node of
/// the later subtask sits after (at, if not strict) some tagged node of the
/// earlier one.
pub fn check_constraints(
    tags: &[SubtaskTag],
    schema: &AlgorithmSchema,
    layout: Layout,
) -> Result<ConstraintReport> {
    let n = layout.n_digits;
    schema.validate(n)?;
    let mut positions: BTreeMap<Subtask, Vec<(usize, String)>> = BTreeMap::new();
    for t in tags {
        positions
            .entry(t.subtask())
            .or_default()
            .push((t.node.position, t.node.to_string()));
    }
    let mut results = Vec::new();
    for (inst, spec) in schema.instances(n) {
        if !spec.required {
            continue;
        }
        let found = positions.get(&inst);
        results.push(ConstraintResult {
            kind: ConstraintKind::Coverage,
            constraint: format!("{inst} is implemented"),
            status: if found.is_some() {
                Status::Pass
            } else {
                Status::Fail
            },
            witness: match found {
                Some(v) => v
                    .iter()
                    .map(|(_, s)| s.as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
                None => format!("no node tagged {inst}"),
            },
        });
    }
    for t in tags {
        let Some(spec) = schema.spec(t.kind) else {
            continue;
        };
        let (lo, hi) = spec.window_for(layout, t.digit)?;
        let outside: Vec<String> = t
            .nodes()
            .into_iter()
            .filter(|n| n.position < lo || n.position > hi)
            .map(|n| n.to_string())
            .collect();
        results.push(ConstraintResult {
            kind: ConstraintKind::Window,
            constraint: format!("{} {} lies in P{lo}..=P{hi}", t.subtask(), t.node),
            status: if outside.is_empty() {
                Status::Pass
            } else {
                Status::Fail
            },
            witness: if outside.is_empty() {
                format!("P{}", t.node.position)
            } else {
                format!("outside: {}", outside.join(" "))
            },
        });
    }
    for (earlier, later, strict) in schema.ordering_edges(n) {
        let rel = if strict { "after" } else { "at or after" };
        let constraint = format!("{later} {rel} {earlier}");
        let (Some(es), Some(ls)) = (positions.get(&earlier), positions.get(&later)) else {
            results.push(ConstraintResult {
                kind: ConstraintKind::Ordering,
                constraint,
                status: Status::Skipped,
                witness: "side not tagged".into(),
            });
            continue;
        };
        let ok = |e: usize, l: usize| if strict { e < l } else { e <= l };
        let witness = ls.iter().find_map(|(lp, ln)| {
            es.iter()
                .find(|(ep, _)| ok(*ep, *lp))
                .map(|(_, en)| (en, ln))
        });
        results.push(match witness {
            Some((en, ln)) => ConstraintResult {
                kind: ConstraintKind::Ordering,
                constraint,
                status: Status::Pass,
                witness: format!("{en} -> {ln}"),
            },
            None => ConstraintResult {
                kind: ConstraintKind::Ordering,
                constraint,
                status: Status::Fail,
                witness: format!(
                    "earliest {earlier} at P{}, latest {later} at P{}",
                    es.iter().map(|x| x.0).min().unwrap_or(0),
                    ls.iter().map(|x| x.0).max().unwrap_or(0)
                ),
            },
        });
    }
    Ok(ConstraintReport { results })
}
