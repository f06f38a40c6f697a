use cascade_model::{NodeId, Transformer};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{InterpError, Result};
use crate::probe::ProbeSet;
use crate::run::{node_activations, NodeOutputs};

pub const N_COMPONENTS: usize = 2;
pub const CLUSTER_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Projection of every probe question onto the leading components.
    pub coords: Vec<[f64; N_COMPONENTS]>,
    /// Explained-variance ratios of the leading components.
    pub evr: Vec<f64>,
    pub labels: Vec<usize>,
    /// Nearest-centroid accuracy on the held-out questions.
    pub cluster_score: f64,
    /// Total variance is numerically zero.
    pub degenerate: bool,
}

impl PcaResult {
    pub fn passes(&self) -> bool {
        !self.degenerate && self.cluster_score >= CLUSTER_THRESHOLD
    }
}

/// PCA of row vectors. Within each class, alternate rows are held out:
/// components and centroids are fit on the rest and the cluster score is
/// measured on the held-out rows.
pub fn pca(vectors: &[Vec<f32>], labels: &[usize]) -> Result<PcaResult> {
    if vectors.len() != labels.len() || vectors.len() < 4 {
        return Err(InterpError::Probe(format!(
            "PCA needs at least 4 labeled vectors, got {}",
            vectors.len()
        )));
    }
    let d = vectors[0].len();
    let mut seen = std::collections::HashMap::new();
    let held_out: Vec<bool> = labels
        .iter()
        .map(|&l| {
            let c = seen.entry(l).or_insert(0usize);
            *c += 1;
            *c % 2 == 0
        })
        .collect();
    let train: Vec<usize> = (0..vectors.len()).filter(|&i| !held_out[i]).collect();
    let mut mean = vec![0.0f64; d];
    for &i in &train {
        for (m, &v) in mean.iter_mut().zip(&vectors[i]) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= train.len() as f64);
    let centered = |i: usize| -> Vec<f64> {
        vectors[i]
            .iter()
            .zip(&mean)
            .map(|(&v, m)| v as f64 - m)
            .collect()
    };
    let x = DMatrix::from_fn(train.len(), d, |r, c| vectors[train[r]][c] as f64 - mean[c]);
    let cov = x.transpose() * &x / (train.len().max(2) - 1) as f64;
    let total: f64 = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let degenerate = total <= 1e-12;
    let evr: Vec<f64> = order
        .iter()
        .take(N_COMPONENTS)
        .map(|&i| {
            if degenerate {
                0.0
            } else {
                (eig.eigenvalues[i] / total).max(0.0)
            }
        })
        .collect();
    let project = |v: &[f64]| -> [f64; N_COMPONENTS] {
        let mut out = [0.0; N_COMPONENTS];
        for (j, &i) in order.iter().take(N_COMPONENTS).enumerate() {
            out[j] = eig
                .eigenvectors
                .column(i)
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum();
        }
        out
    };
    let coords: Vec<[f64; N_COMPONENTS]> =
        (0..vectors.len()).map(|i| project(&centered(i))).collect();

    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![[0.0; N_COMPONENTS]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for &i in &train {
        counts[labels[i]] += 1;
        for j in 0..N_COMPONENTS {
            sums[labels[i]][j] += coords[i][j];
        }
    }
    let centroids: Vec<Option<[f64; N_COMPONENTS]>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s.map(|x| x / c as f64)))
        .collect();
    let test: Vec<usize> = (0..vectors.len()).filter(|&i| held_out[i]).collect();
    let correct = test
        .iter()
        .filter(|&&i| {
            let nearest = centroids
                .iter()
                .enumerate()
                .filter_map(|(c, m)| m.map(|m| (c, dist2(&coords[i], &m))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c);
            nearest == Some(labels[i])
        })
        .count();
    Ok(PcaResult {
        coords,
        evr,
        labels: labels.to_vec(),
        cluster_score: if degenerate {
            0.0
        } else {
            correct as f64 / test.len() as f64
        },
        degenerate,
    })
}

fn dist2(a: &[f64; N_COMPONENTS], b: &[f64; N_COMPONENTS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// PCA over the summed output of `nodes` on a labeled probe set.
pub fn pca_node(model: &Transformer, nodes: &[NodeId], probe: &ProbeSet) -> Result<PcaResult> {
    let labels = probe
        .labels
        .as_ref()
        .ok_or_else(|| InterpError::Probe("PCA needs a labeled probe set".into()))?;
    let acts = node_activations(model, &probe.questions, nodes)?;
    pca(&acts, labels)
}

/// As [`pca_node`], reading outputs captured for `probe`'s questions.
pub fn pca_captured(
    outputs: &NodeOutputs,
    nodes: &[NodeId],
    probe: &ProbeSet,
) -> Result<PcaResult> {
    let labels = probe
        .labels
        .as_ref()
        .ok_or_else(|| InterpError::Probe("PCA needs a labeled probe set".into()))?;
    if outputs.len() != probe.len() {
        return Err(InterpError::Probe(
            "captured outputs do not match the probe set".into(),
        ));
    }
    pca(&outputs.summed(nodes), labels)
}
