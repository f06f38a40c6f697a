use cascade_nn::{Scalar, Tape, Tensor, Var};

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::node::{Patch, Site};
use crate::params::ModelParams;

const LN_EPS: f64 = 1e-5;

/// Tape variables of one layer, kept so callers can read activations.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub resid_pre: Var,
    pub pattern: Var,
    pub head_out: Var,
    pub mlp_out: Var,
}

#[derive(Debug, Clone)]
pub struct ForwardVars {
    pub logits: Var,
    pub layers: Vec<LayerVars>,
    pub resid_final: Var,
}

fn check_patch(cfg: &ModelConfig, patch: &Patch, batch: usize, seq_len: usize) -> Result<()> {
    let node = patch.node;
    let head_ok = match node.site {
        Site::Head(h) => h < cfg.n_heads,
        Site::Mlp => true,
    };
    let row_ok = patch.row.is_none_or(|r| r < batch);
    if node.position >= seq_len || node.layer >= cfg.n_layers || !head_ok || !row_ok {
        return Err(ModelError::BadNode {
            node: node.to_string(),
        });
    }
    if patch.value.len() != cfg.d_model {
        return Err(ModelError::PatchDim {
            node: node.to_string(),
            expected: cfg.d_model,
            found: patch.value.len(),
        });
    }
    Ok(())
}

/// Overwrites rows of `value` for each matching patch. `offset(patch, row)`
/// maps a patch and batch row to the element offset of the vector.
fn apply_patches<T: Scalar>(
    value: &mut Tensor<T>,
    patches: &[&Patch],
    batch: usize,
    offset: impl Fn(&Patch, usize) -> usize,
) {
    for patch in patches {
        let rows: Vec<usize> = match patch.row {
            Some(r) => vec![r],
            None => (0..batch).collect(),
        };
        for r in rows {
            let start = offset(patch, r);
            for (dst, &src) in value.data_mut()[start..start + patch.value.len()]
                .iter_mut()
                .zip(&patch.value)
            {
                *dst = T::from_f64(src as f64);
            }
        }
    }
}

/// Records a pre-norm decoder forward pass on `tape`.
///
/// `tokens` holds `batch` rows of equal length. Patched contributions enter
/// the tape as constants, so no gradient flows through them.
pub fn build_forward<T: Scalar>(
    tape: &mut Tape<T>,
    cfg: &ModelConfig,
    p: &ModelParams<Var>,
    tokens: &[usize],
    batch: usize,
    patches: &[Patch],
) -> Result<ForwardVars> {
    if batch == 0 || tokens.is_empty() || tokens.len() % batch != 0 {
        return Err(ModelError::InvalidConfig(format!(
            "{} tokens do not split into {batch} rows",
            tokens.len()
        )));
    }
    let t = tokens.len() / batch;
    if t > cfg.context_len {
        return Err(ModelError::LengthOverflow {
            len: t,
            context: cfg.context_len,
        });
    }
    if let Some(&bad) = tokens.iter().find(|&&id| id >= cfg.vocab_size) {
        return Err(ModelError::BadToken(bad));
    }
    for patch in patches {
        check_patch(cfg, patch, batch, t)?;
    }
    let (h, dh, d) = (cfg.n_heads, cfg.d_head, cfg.d_model);
    let n = batch * t;
    let eps = T::from_f64(LN_EPS);
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());

    let positions: Vec<usize> = (0..n).map(|i| i % t).collect();
    let tok = tape.embedding(p.tok_embed, tokens)?;
    let pos = tape.embedding(p.pos_embed, &positions)?;
    let mut x = tape.add(tok, pos)?;

    let mut layers = Vec::with_capacity(cfg.n_layers);
    for (l, lp) in p.layers.iter().enumerate() {
        let resid_pre = x;
        let hn = tape.layer_norm(x, lp.ln1_g, lp.ln1_b, eps)?;
        // [h, n, dh] -> [h * batch, t, dh]
        let q = tape.bmm(hn, lp.w_q, false)?;
        let k = tape.bmm(hn, lp.w_k, false)?;
        let v = tape.bmm(hn, lp.w_v, false)?;
        let q = tape.reshape(q, &[h * batch, t, dh])?;
        let k = tape.reshape(k, &[h * batch, t, dh])?;
        let v = tape.reshape(v, &[h * batch, t, dh])?;
        let scores = tape.bmm(q, k, true)?;
        let pattern = tape.causal_softmax(scores, scale)?;
        let z = tape.bmm(pattern, v, false)?;
        let z = tape.reshape(z, &[h, n, dh])?;
        let mut head_out = tape.bmm(z, lp.w_o, false)?;

        let head_patches: Vec<&Patch> = patches
            .iter()
            .filter(|pt| pt.node.layer == l && pt.node.is_head())
            .collect();
        if !head_patches.is_empty() {
            let mut value = tape.value(head_out).clone();
            apply_patches(&mut value, &head_patches, batch, |pt, r| {
                let hh = match pt.node.site {
                    Site::Head(hh) => hh,
                    Site::Mlp => unreachable!(),
                };
                (hh * n + r * t + pt.node.position) * d
            });
            head_out = tape.constant(value);
        }
        let attn = tape.sum_leading(head_out)?;
        x = tape.add(x, attn)?;

        let hn = tape.layer_norm(x, lp.ln2_g, lp.ln2_b, eps)?;
        let pre = tape.matmul(hn, lp.w_in)?;
        let pre = tape.add_bias(pre, lp.b_in)?;
        let act = tape.relu(pre);
        let out = tape.matmul(act, lp.w_out)?;
        let mut mlp_out = tape.add_bias(out, lp.b_out)?;
        let mlp_patches: Vec<&Patch> = patches
            .iter()
            .filter(|pt| pt.node.layer == l && !pt.node.is_head())
            .collect();
        if !mlp_patches.is_empty() {
            let mut value = tape.value(mlp_out).clone();
            apply_patches(&mut value, &mlp_patches, batch, |pt, r| {
                (r * t + pt.node.position) * d
            });
            mlp_out = tape.constant(value);
        }
        x = tape.add(x, mlp_out)?;
        layers.push(LayerVars {
            resid_pre,
            pattern,
            head_out,
            mlp_out,
        });
    }
    let resid_final = x;
    let xf = tape.layer_norm(x, p.lnf_g, p.lnf_b, eps)?;
    let logits = tape.matmul(xf, p.unembed)?;
    Ok(ForwardVars {
        logits,
        layers,
        resid_final,
    })
}
