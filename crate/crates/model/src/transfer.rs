use cascade_nn::Tensor;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::model::Transformer;
use crate::params::{LayerParams, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Align {
    #[default]
    First,
    Last,
}

/// Where a smaller donor model is placed inside a larger target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Placement {
    pub layers: Align,
    pub heads: Align,
}

/// Which donor weights a copy touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Q, K, V and O projections of the donor heads.
    Attention,
    /// Every donor tensor: embeddings, norms, heads, MLPs and unembedding.
    All,
}

impl Placement {
    pub fn layer_offset(&self, donor: &ModelConfig, target: &ModelConfig) -> usize {
        match self.layers {
            Align::First => 0,
            Align::Last => target.n_layers - donor.n_layers,
        }
    }

    pub fn head_offset(&self, donor: &ModelConfig, target: &ModelConfig) -> usize {
        match self.heads {
            Align::First => 0,
            Align::Last => target.n_heads - donor.n_heads,
        }
    }
}

pub fn check_compatible(donor: &ModelConfig, target: &ModelConfig) -> Result<()> {
    let fail = |msg: String| Err(ModelError::Transfer(msg));
    if donor.n_digits != target.n_digits || donor.vocab_size != target.vocab_size {
        return fail("donor and target must share n_digits and vocabulary".into());
    }
    if donor.n_layers > target.n_layers || donor.n_heads > target.n_heads {
        return fail(format!(
            "donor {}L/{}H does not fit in target {}L/{}H",
            donor.n_layers, donor.n_heads, target.n_layers, target.n_heads
        ));
    }
    if donor.d_head != target.d_head {
        return fail(format!(
            "d_head differs: donor {} vs target {}",
            donor.d_head, target.d_head
        ));
    }
    if donor.d_model > target.d_model || donor.d_mlp > target.d_mlp {
        return fail("donor is wider than target".into());
    }
    if donor.context_len > target.context_len {
        return fail("donor context is longer than target".into());
    }
    Ok(())
}

/// Copies `src` into `dst` with its origin at `offset` (one entry per dim).
fn copy_block(src: &Tensor<f32>, dst: &mut Tensor<f32>, offset: &[usize]) {
    let ss = src.shape().to_vec();
    let ds = dst.shape().to_vec();
    assert_eq!(ss.len(), ds.len());
    assert!(ss
        .iter()
        .zip(&ds)
        .zip(offset)
        .all(|((s, d), o)| s + o <= *d));
    let rank = ss.len();
    if rank == 0 {
        dst.data_mut()[0] = src.data()[0];
        return;
    }
    let inner = ss[rank - 1];
    let outer: usize = ss[..rank - 1].iter().product();
    for i in 0..outer {
        // Multi-index of the row in src, shifted into dst.
        let mut rem = i;
        let mut dst_row = 0;
        for dim in 0..rank - 1 {
            let stride: usize = ss[dim + 1..rank - 1].iter().product();
            let idx = rem / stride;
            rem %= stride;
            dst_row = dst_row * ds[dim] + idx + offset[dim];
        }
        let d0 = dst_row * ds[rank - 1] + offset[rank - 1];
        dst.data_mut()[d0..d0 + inner].copy_from_slice(&src.data()[i * inner..(i + 1) * inner]);
    }
}

fn copy_layer(
    src: &LayerParams<Tensor<f32>>,
    dst: &mut LayerParams<Tensor<f32>>,
    head_off: usize,
    scope: Scope,
) {
    copy_block(&src.w_q, &mut dst.w_q, &[head_off, 0, 0]);
    copy_block(&src.w_k, &mut dst.w_k, &[head_off, 0, 0]);
    copy_block(&src.w_v, &mut dst.w_v, &[head_off, 0, 0]);
    copy_block(&src.w_o, &mut dst.w_o, &[head_off, 0, 0]);
    if scope == Scope::All {
        for (s, d) in [
            (&src.ln1_g, &mut dst.ln1_g),
            (&src.ln1_b, &mut dst.ln1_b),
            (&src.ln2_g, &mut dst.ln2_g),
            (&src.ln2_b, &mut dst.ln2_b),
            (&src.b_in, &mut dst.b_in),
            (&src.b_out, &mut dst.b_out),
        ] {
            copy_block(s, d, &[0]);
        }
        copy_block(&src.w_in, &mut dst.w_in, &[0, 0]);
        copy_block(&src.w_out, &mut dst.w_out, &[0, 0]);
    }
}

/// Overwrites the target slices that correspond to donor weights.
pub fn copy_donor_into(
    donor: &Transformer,
    target: &mut Transformer,
    placement: Placement,
    scope: Scope,
) -> Result<()> {
    check_compatible(&donor.config, &target.config)?;
    let loff = placement.layer_offset(&donor.config, &target.config);
    let hoff = placement.head_offset(&donor.config, &target.config);
    let src: &ModelParams<Tensor<f32>> = &donor.params;
    let dst = &mut target.params;
    for (l, layer) in src.layers.iter().enumerate() {
        copy_layer(layer, &mut dst.layers[l + loff], hoff, scope);
    }
    if scope == Scope::All {
        copy_block(&src.tok_embed, &mut dst.tok_embed, &[0, 0]);
        copy_block(&src.pos_embed, &mut dst.pos_embed, &[0, 0]);
        copy_block(&src.lnf_g, &mut dst.lnf_g, &[0]);
        copy_block(&src.lnf_b, &mut dst.lnf_b, &[0]);
        copy_block(&src.unembed, &mut dst.unembed, &[0, 0]);
    }
    Ok(())
}

/// A fresh target model with every donor tensor copied into its placed
/// slice; weights outside the donor footprint keep their fresh init.
pub fn transfer_weights(
    donor: &Transformer,
    target: ModelConfig,
    placement: Placement,
) -> Result<Transformer> {
    let mut model = Transformer::new(target)?;
    copy_donor_into(donor, &mut model, placement, Scope::All)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copy_block_places_sub_tensor() {
        let src = Tensor::from_fn(&[2, 2], |i| i as f32 + 1.0);
        let mut dst = Tensor::zeros(&[3, 4]);
        copy_block(&src, &mut dst, &[1, 2]);
        assert_eq!(
            dst.data(),
            &[0., 0., 0., 0., 0., 0., 1., 2., 0., 0., 3., 4.]
        );
    }

    #[test]
    fn copy_block_rank3() {
        let src = Tensor::from_fn(&[2, 1, 2], |i| i as f32 + 1.0);
        let mut dst = Tensor::zeros(&[3, 2, 2]);
        copy_block(&src, &mut dst, &[1, 1, 0]);
        assert_eq!(
            dst.data(),
            &[0., 0., 0., 0., 0., 0., 1., 2., 0., 0., 3., 4.]
        );
    }
}
