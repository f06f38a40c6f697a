//! Batched model execution over question lists.

use cascade_core::question::encode_example;
use cascade_core::{oracle_eval, Answer, Question, TokenId};
use std::collections::HashMap;

use cascade_model::{argmax, ActivationCache, NodeId, Patch, Transformer};

use crate::error::Result;

pub const CHUNK: usize = 500;

/// Full `3n + 4` token rows with the oracle answers.
pub fn sequences(questions: &[Question]) -> Vec<TokenId> {
    questions
        .iter()
        .flat_map(|q| encode_example(q, &oracle_eval(q)))
        .collect()
}

fn inputs(rows: &[Vec<TokenId>]) -> Vec<TokenId> {
    rows.iter()
        .flat_map(|r| r[..r.len() - 1].iter().copied())
        .collect()
}

/// Teacher-forced argmax answer tokens for each `(question, answer)` row,
/// with `patches` applied. Patches with a row index address rows of the
/// whole list; they are re-indexed per chunk.
pub fn predict_forced(
    model: &Transformer,
    rows: &[(Question, Answer)],
    patches: &[Patch],
) -> Result<Vec<Vec<TokenId>>> {
    let layout = model.layout();
    let t = layout.seq_len() - 1;
    let mut out = Vec::with_capacity(rows.len());
    for (c, chunk) in rows.chunks(CHUNK).enumerate() {
        let start = c * CHUNK;
        let tokens: Vec<Vec<TokenId>> = chunk.iter().map(|(q, a)| encode_example(q, a)).collect();
        let local: Vec<Patch> = patches
            .iter()
            .filter_map(|p| match p.row {
                None => Some(p.clone()),
                Some(r) if (start..start + chunk.len()).contains(&r) => Some(Patch {
                    row: Some(r - start),
                    ..p.clone()
                }),
                Some(_) => None,
            })
            .collect();
        let result = model.run(&inputs(&tokens), chunk.len(), &local, false)?;
        for b in 0..chunk.len() {
            out.push(
                layout
                    .loss_positions()
                    .map(|p| argmax(result.logits.row(b * t + p)))
                    .collect(),
            );
        }
    }
    Ok(out)
}

/// Runs `questions` (with oracle answers) in chunks and hands each chunk's
/// cache to `f` along with the index of its first question.
pub fn for_each_cache(
    model: &Transformer,
    questions: &[Question],
    mut f: impl FnMut(&ActivationCache, usize),
) -> Result<()> {
    for (c, chunk) in questions.chunks(CHUNK).enumerate() {
        let seqs = sequences(chunk);
        let rows: Vec<Vec<TokenId>> = seqs
            .chunks(model.layout().seq_len())
            .map(|r| r.to_vec())
            .collect();
        let result = model.run(&inputs(&rows), chunk.len(), &[], true)?;
        f(result.cache.as_ref().expect("captured"), c * CHUNK);
    }
    Ok(())
}

/// Outputs of every node on a fixed question list, captured in one pass so
/// that many node sets can be read without re-running the model.
#[derive(Debug, Clone)]
pub struct NodeOutputs {
    index: HashMap<NodeId, usize>,
    n_questions: usize,
    d_model: usize,
    /// `[node][question][d_model]`.
    data: Vec<f32>,
}

impl NodeOutputs {
    pub fn capture(model: &Transformer, questions: &[Question]) -> Result<Self> {
        let d = model.config.d_model;
        let n = questions.len();
        let mut index = HashMap::new();
        let mut data = Vec::new();
        for_each_cache(model, questions, |cache, start| {
            if index.is_empty() {
                index = cache
                    .nodes()
                    .into_iter()
                    .enumerate()
                    .map(|(i, n)| (n, i))
                    .collect();
                data = vec![0.0; index.len() * n * d];
            }
            for (&node, &i) in &index {
                for b in 0..cache.batch {
                    let at = (i * n + start + b) * d;
                    data[at..at + d].copy_from_slice(cache.node_output(b, node));
                }
            }
        })?;
        Ok(NodeOutputs {
            index,
            n_questions: n,
            d_model: d,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.n_questions
    }

    pub fn is_empty(&self) -> bool {
        self.n_questions == 0
    }

    /// Output of `node` on question `row`.
    pub fn get(&self, node: NodeId, row: usize) -> Option<&[f32]> {
        let i = *self.index.get(&node)?;
        let at = (i * self.n_questions + row) * self.d_model;
        Some(&self.data[at..at + self.d_model])
    }

    /// Output vectors of `nodes` summed, one per question.
    pub fn summed(&self, nodes: &[NodeId]) -> Vec<Vec<f32>> {
        (0..self.n_questions)
            .map(|row| {
                let mut out = vec![0.0f32; self.d_model];
                for &node in nodes {
                    if let Some(v) = self.get(node, row) {
                        for (o, x) in out.iter_mut().zip(v) {
                            *o += x;
                        }
                    }
                }
                out
            })
            .collect()
    }
}

/// Output vectors of `nodes` summed, one per question.
pub fn node_activations(
    model: &Transformer,
    questions: &[Question],
    nodes: &[NodeId],
) -> Result<Vec<Vec<f32>>> {
    let d = model.config.d_model;
    let mut out = vec![vec![0.0f32; d]; questions.len()];
    for_each_cache(model, questions, |cache, start| {
        for b in 0..cache.batch {
            for &node in nodes {
                for (o, v) in out[start + b].iter_mut().zip(cache.node_output(b, node)) {
                    *o += v;
                }
            }
        }
    })?;
    Ok(out)
}

/// Mean output of every node over `questions`, indexed like `cache.nodes()`.
pub fn mean_activations(
    model: &Transformer,
    questions: &[Question],
) -> Result<Vec<(NodeId, Vec<f32>)>> {
    let mut sums: Vec<(NodeId, Vec<f64>)> = Vec::new();
    for_each_cache(model, questions, |cache, _| {
        if sums.is_empty() {
            sums = cache
                .nodes()
                .into_iter()
                .map(|n| (n, vec![0.0; cache.d_model]))
                .collect();
        }
        for (node, sum) in sums.iter_mut() {
            for b in 0..cache.batch {
                for (s, &v) in sum.iter_mut().zip(cache.node_output(b, *node)) {
                    *s += v as f64;
                }
            }
        }
    })?;
    let n = questions.len().max(1) as f64;
    Ok(sums
        .into_iter()
        .map(|(node, s)| (node, s.into_iter().map(|x| (x / n) as f32).collect()))
        .collect())
}
