use cascade_nn::{Scalar, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::ModelConfig;

/// Weights of one transformer block. Head-major projections:
/// `w_q`, `w_k`, `w_v` are `[n_heads, d_model, d_head]`, `w_o` is
/// `[n_heads, d_head, d_model]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<P> {
    pub ln1_g: P,
    pub ln1_b: P,
    pub w_q: P,
    pub w_k: P,
    pub w_v: P,
    pub w_o: P,
    pub ln2_g: P,
    pub ln2_b: P,
    pub w_in: P,
    pub b_in: P,
    pub w_out: P,
    pub b_out: P,
}

const LAYER_FIELDS: [&str; 12] = [
    "ln1_g", "ln1_b", "w_q", "w_k", "w_v", "w_o", "ln2_g", "ln2_b", "w_in", "b_in", "w_out",
    "b_out",
];

impl<P> LayerParams<P> {
    fn into_vec(self) -> Vec<P> {
        vec![
            self.ln1_g, self.ln1_b, self.w_q, self.w_k, self.w_v, self.w_o, self.ln2_g, self.ln2_b,
            self.w_in, self.b_in, self.w_out, self.b_out,
        ]
    }

    fn refs(&self) -> [&P; 12] {
        [
            &self.ln1_g,
            &self.ln1_b,
            &self.w_q,
            &self.w_k,
            &self.w_v,
            &self.w_o,
            &self.ln2_g,
            &self.ln2_b,
            &self.w_in,
            &self.b_in,
            &self.w_out,
            &self.b_out,
        ]
    }

    fn from_iter(it: &mut impl Iterator<Item = P>) -> Option<Self> {
        Some(LayerParams {
            ln1_g: it.next()?,
            ln1_b: it.next()?,
            w_q: it.next()?,
            w_k: it.next()?,
            w_v: it.next()?,
            w_o: it.next()?,
            ln2_g: it.next()?,
            ln2_b: it.next()?,
            w_in: it.next()?,
            b_in: it.next()?,
            w_out: it.next()?,
            b_out: it.next()?,
        })
    }
}

/// All model weights, generic over the slot type so the same structure
/// holds tensors, tape variables or optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<P> {
    pub tok_embed: P,
    pub pos_embed: P,
    pub layers: Vec<LayerParams<P>>,
    pub lnf_g: P,
    pub lnf_b: P,
    pub unembed: P,
}

impl<P> ModelParams<P> {
    /// Parameter names in canonical order, e.g. `layers.1.w_q`.
    pub fn names(n_layers: usize) -> Vec<String> {
        let mut names = vec!["tok_embed".to_string(), "pos_embed".to_string()];
        for l in 0..n_layers {
            names.extend(LAYER_FIELDS.iter().map(|f| format!("layers.{l}.{f}")));
        }
        names.extend(["lnf_g", "lnf_b", "unembed"].map(String::from));
        names
    }

    pub fn into_vec(self) -> Vec<P> {
        let mut out = vec![self.tok_embed, self.pos_embed];
        for layer in self.layers {
            out.extend(layer.into_vec());
        }
        out.extend([self.lnf_g, self.lnf_b, self.unembed]);
        out
    }

    pub fn refs(&self) -> Vec<&P> {
        let mut out = vec![&self.tok_embed, &self.pos_embed];
        for layer in &self.layers {
            out.extend(layer.refs());
        }
        out.extend([&self.lnf_g, &self.lnf_b, &self.unembed]);
        out
    }

    /// Inverse of [`ModelParams::into_vec`]. Returns `None` when the length
    /// does not match `n_layers`.
    pub fn from_vec(n_layers: usize, values: Vec<P>) -> Option<Self> {
        if values.len() != 5 + 12 * n_layers {
            return None;
        }
        let mut it = values.into_iter();
        let tok_embed = it.next()?;
        let pos_embed = it.next()?;
        let layers = (0..n_layers)
            .map(|_| LayerParams::from_iter(&mut it))
            .collect::<Option<Vec<_>>>()?;
        Some(ModelParams {
            tok_embed,
            pos_embed,
            layers,
            lnf_g: it.next()?,
            lnf_b: it.next()?,
            unembed: it.next()?,
        })
    }

    pub fn map<Q>(&self, mut f: impl FnMut(&P) -> Q) -> ModelParams<Q> {
        let n_layers = self.layers.len();
        let mapped = self.refs().into_iter().map(&mut f).collect();
        ModelParams::from_vec(n_layers, mapped).expect("same structure")
    }
}

/// Expected shape of every parameter, in canonical order.
pub fn param_shapes(cfg: &ModelConfig) -> Vec<Vec<usize>> {
    let (d, h, dh, m, v) = (
        cfg.d_model,
        cfg.n_heads,
        cfg.d_head,
        cfg.d_mlp,
        cfg.vocab_size,
    );
    let mut shapes = vec![vec![v, d], vec![cfg.context_len, d]];
    for _ in 0..cfg.n_layers {
        shapes.extend([
            vec![d],
            vec![d],
            vec![h, d, dh],
            vec![h, d, dh],
            vec![h, d, dh],
            vec![h, dh, d],
            vec![d],
            vec![d],
            vec![d, m],
            vec![m],
            vec![m, d],
            vec![d],
        ]);
    }
    shapes.extend([vec![d], vec![d], vec![d, v]]);
    shapes
}

/// Normal(0, 0.02) matrices and embeddings, unit layer-norm gains, zero
/// biases.
pub fn init_params<T: Scalar>(cfg: &ModelConfig) -> ModelParams<Tensor<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 0.02).expect("valid std");
    let names = ModelParams::<()>::names(cfg.n_layers);
    let tensors = param_shapes(cfg)
        .into_iter()
        .zip(&names)
        .map(|(shape, name)| {
            let field = name.rsplit('.').next().unwrap_or(name);
            if field.ends_with("_g") {
                Tensor::filled(&shape, T::one())
            } else if field.starts_with("b_") || field.ends_with("_b") {
                Tensor::zeros(&shape)
            } else {
                Tensor::from_fn(&shape, |_| T::from_f64(normal.sample(&mut rng)))
            }
        })
        .collect();
    ModelParams::from_vec(cfg.n_layers, tensors).expect("canonical order")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_counts() {
        let cfg = ModelConfig::new(3, 2, 3, 8, 1);
        let p = init_params::<f32>(&cfg);
        let total: usize = p.refs().iter().map(|t| t.len()).sum();
        assert_eq!(total, cfg.parameter_count());
        let names = ModelParams::<()>::names(2);
        assert_eq!(names.len(), p.refs().len());
        assert_eq!(names[4], "layers.0.w_q");
        let back = ModelParams::from_vec(2, p.clone().into_vec()).unwrap();
        assert_eq!(back, p);
        assert!(back.layers[1].ln2_g.data().iter().all(|&x| x == 1.0));
        assert!(back.layers[1].b_in.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn init_is_seeded() {
        let cfg = ModelConfig::new(3, 1, 3, 8, 7);
        assert_eq!(init_params::<f32>(&cfg), init_params::<f32>(&cfg));
        let other = ModelConfig { seed: 8, ..cfg };
        assert_ne!(init_params::<f32>(&cfg), init_params::<f32>(&other));
    }
}
