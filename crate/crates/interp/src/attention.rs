use std::collections::BTreeMap;

use cascade_core::{Layout, Question, Role};
use cascade_model::{ActivationCache, NodeId, Site, Transformer};
use serde::{Deserialize, Serialize};

use crate::error::{InterpError, Result};
use crate::run::for_each_cache;

/// Minimum post-softmax weight for a source to count as attended.
pub const ATTENTION_THRESHOLD: f64 = 0.01;

fn head_of(node: NodeId) -> Result<usize> {
    match node.site {
        Site::Head(h) => Ok(h),
        Site::Mlp => Err(InterpError::NotAHead(node.to_string())),
    }
}

fn profile_from(layout: Layout, weights: &[f64]) -> Vec<(Role, f64)> {
    weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > ATTENTION_THRESHOLD)
        .filter_map(|(p, &w)| layout.role(p).map(|r| (r, w)))
        .collect()
}

/// Sources attended by `node` for batch row `b`, weights above the
/// threshold, in position order.
pub fn attention_profile(
    cache: &ActivationCache,
    layout: Layout,
    b: usize,
    node: NodeId,
) -> Result<Vec<(Role, f64)>> {
    let h = head_of(node)?;
    let row = cache.attention(b, node.layer, h, node.position);
    let weights: Vec<f64> = row.iter().map(|&w| w as f64).collect();
    Ok(profile_from(layout, &weights))
}

/// Mean attention rows of every head at every position over a question set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMeans {
    pub layout: Layout,
    pub n_questions: usize,
    pub rows: BTreeMap<NodeId, Vec<f64>>,
}

impl AttentionMeans {
    pub fn compute(model: &Transformer, questions: &[Question]) -> Result<Self> {
        let mut rows: BTreeMap<NodeId, Vec<f64>> = BTreeMap::new();
        for_each_cache(model, questions, |cache, _| {
            let t = cache.seq_len;
            for l in 0..cache.layers.len() {
                for h in 0..cache.n_heads {
                    for p in 0..t {
                        let acc = rows
                            .entry(NodeId::head(p, l, h))
                            .or_insert_with(|| vec![0.0; t]);
                        for b in 0..cache.batch {
                            for (a, &w) in acc.iter_mut().zip(cache.attention(b, l, h, p)) {
                                *a += w as f64;
                            }
                        }
                    }
                }
            }
        })?;
        let n = questions.len().max(1) as f64;
        for r in rows.values_mut() {
            r.iter_mut().for_each(|w| *w /= n);
        }
        Ok(AttentionMeans {
            layout: model.layout(),
            n_questions: questions.len(),
            rows,
        })
    }

    /// Mean weight `node` puts on the token at `role`.
    pub fn weight(&self, node: NodeId, role: Role) -> Result<f64> {
        head_of(node)?;
        let p = self.layout.position(role);
        Ok(self
            .rows
            .get(&node)
            .and_then(|r| r.get(p))
            .copied()
            .unwrap_or(0.0))
    }

    /// Sources with mean weight above the threshold.
    pub fn profile(&self, node: NodeId) -> Result<Vec<(Role, f64)>> {
        head_of(node)?;
        Ok(self
            .rows
            .get(&node)
            .map(|r| profile_from(self.layout, r))
            .unwrap_or_default())
    }
}
