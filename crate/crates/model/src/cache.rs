use cascade_nn::Tensor;

use crate::node::{NodeId, Site};

/// Activations of one layer for a batch of `b` sequences of length `t`.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Residual stream entering the layer, `[b * t, d_model]`.
    pub resid_pre: Tensor<f32>,
    /// Post-softmax attention, `[n_heads * b, t, t]`.
    pub pattern: Tensor<f32>,
    /// Per-head contribution to the residual stream, `[n_heads, b * t, d_model]`.
    pub head_out: Tensor<f32>,
    /// MLP contribution to the residual stream, `[b * t, d_model]`.
    pub mlp_out: Tensor<f32>,
}

#[derive(Debug, Clone)]
pub struct ActivationCache {
    pub batch: usize,
    pub seq_len: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub layers: Vec<LayerCache>,
    /// Residual stream after the last layer, before the final norm.
    pub resid_final: Tensor<f32>,
}

impl ActivationCache {
    fn row(&self, b: usize, p: usize) -> usize {
        b * self.seq_len + p
    }

    /// Attention of head `h` in layer `l` from position `p` over positions `0..t`.
    pub fn attention(&self, b: usize, l: usize, h: usize, p: usize) -> &[f32] {
        let t = self.seq_len;
        let start = ((h * self.batch + b) * t + p) * t;
        &self.layers[l].pattern.data()[start..start + t]
    }

    pub fn head_output(&self, b: usize, l: usize, h: usize, p: usize) -> &[f32] {
        let d = self.d_model;
        let n = self.batch * self.seq_len;
        let start = (h * n + self.row(b, p)) * d;
        &self.layers[l].head_out.data()[start..start + d]
    }

    pub fn mlp_output(&self, b: usize, l: usize, p: usize) -> &[f32] {
        self.layers[l].mlp_out.row(self.row(b, p))
    }

    pub fn resid_pre(&self, b: usize, l: usize, p: usize) -> &[f32] {
        self.layers[l].resid_pre.row(self.row(b, p))
    }

    pub fn resid_final(&self, b: usize, p: usize) -> &[f32] {
        self.resid_final.row(self.row(b, p))
    }

    /// The residual contribution of `node` for batch row `b`.
    pub fn node_output(&self, b: usize, node: NodeId) -> &[f32] {
        match node.site {
            Site::Head(h) => self.head_output(b, node.layer, h, node.position),
            Site::Mlp => self.mlp_output(b, node.layer, node.position),
        }
    }

    /// Every node present in the cache.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        for p in 0..self.seq_len {
            for l in 0..self.layers.len() {
                out.extend((0..self.n_heads).map(|h| NodeId::head(p, l, h)));
                out.push(NodeId::mlp(p, l));
            }
        }
        out
    }
}
