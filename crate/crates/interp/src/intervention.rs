use cascade_core::{answer_with_overrides, Answer, Question, TokenId};
use cascade_model::{NodeId, Patch, Transformer};
use serde::{Deserialize, Serialize};

use crate::error::InterpError;
use crate::error::Result;
use crate::probe::PairSet;
use crate::run::{predict_forced, NodeOutputs};
use crate::subtask::SubtaskKind;

/// Outcome of one swap: the cascade's expected answer for the base question
/// with the donor's subtask value, and the model's teacher-forced argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct InterchangeResult {
    pub expected: Answer,
    pub predicted: Vec<TokenId>,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterchangeStats {
    pub n_pairs: usize,
    pub successes: usize,
    pub rate: f64,
}

/// Runs the donor with capture, then the base with `nodes` patched to the
/// donor's outputs. Expectations come from the symbolic cascade.
pub fn interchange_intervention(
    model: &Transformer,
    nodes: &[NodeId],
    kind: SubtaskKind,
    k: usize,
    base: &Question,
    donor: &Question,
) -> Result<InterchangeResult> {
    kind.check_pair(k, base, donor)?;
    let donors = NodeOutputs::capture(model, std::slice::from_ref(donor))?;
    Ok(swap_batch(
        model,
        nodes,
        kind,
        k,
        &[(base.clone(), donor.clone())],
        &donors,
    )?
    .remove(0))
}

fn swap_batch(
    model: &Transformer,
    nodes: &[NodeId],
    kind: SubtaskKind,
    k: usize,
    pairs: &[(Question, Question)],
    donors: &NodeOutputs,
) -> Result<Vec<InterchangeResult>> {
    let mut patches = Vec::with_capacity(nodes.len() * pairs.len());
    for &node in nodes {
        for row in 0..pairs.len() {
            let value = donors
                .get(node, row)
                .ok_or_else(|| InterpError::Probe(format!("{node} is not in the model")))?;
            patches.push(Patch {
                node,
                row: Some(row),
                value: value.to_vec(),
            });
        }
    }
    let rows: Vec<(Question, Answer)> = pairs
        .iter()
        .map(|(b, d)| (b.clone(), answer_with_overrides(b, &kind.overrides(d, k))))
        .collect();
    let predicted = predict_forced(model, &rows, &patches)?;
    Ok(rows
        .into_iter()
        .zip(predicted)
        .map(|((_, expected), predicted)| {
            let matched = expected.encode() == predicted;
            InterchangeResult {
                expected,
                predicted,
                matched,
            }
        })
        .collect())
}

/// Fraction of pairs whose patched prediction equals the cascade's
/// expectation.
pub fn interchange_rate(
    model: &Transformer,
    nodes: &[NodeId],
    set: &PairSet,
) -> Result<InterchangeStats> {
    let donors: Vec<Question> = set.pairs.iter().map(|(_, d)| d.clone()).collect();
    interchange_rate_captured(model, nodes, set, &NodeOutputs::capture(model, &donors)?)
}

/// As [`interchange_rate`], with the donors' node outputs captured in
/// advance (row `i` belongs to the donor of pair `i`).
pub fn interchange_rate_captured(
    model: &Transformer,
    nodes: &[NodeId],
    set: &PairSet,
    donors: &NodeOutputs,
) -> Result<InterchangeStats> {
    for (b, d) in &set.pairs {
        set.kind.check_pair(set.digit, b, d)?;
    }
    if donors.len() != set.pairs.len() {
        return Err(InterpError::Probe(
            "captured outputs do not match the pair set".into(),
        ));
    }
    let results = swap_batch(model, nodes, set.kind, set.digit, &set.pairs, donors)?;
    let successes = results.iter().filter(|r| r.matched).count();
    Ok(InterchangeStats {
        n_pairs: results.len(),
        successes,
        rate: successes as f64 / results.len().max(1) as f64,
    })
}
