use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 8e-5,
            weight_decay: 0.1,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for AdamW with decoupled weight decay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState<T> {
    pub config: AdamWConfig,
    pub step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(config: AdamWConfig, params: &[Tensor<T>]) -> Self {
        OptimizerState {
            config,
            step: 0,
            first: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            second: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    /// One bias-corrected AdamW update at learning rate `lr`.
    ///
    /// Non-finite gradients are rejected before anything is modified, so
    /// parameters never pick up NaN or Inf.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(NnError::InvalidShape(format!(
                "{} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first[i].shape() {
                return Err(NnError::ShapeMismatch {
                    op: "adamw_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                return Err(NnError::NonFinite(format!("gradient of parameter {i}")));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let b1 = T::from_f64(c.beta1);
        let b2 = T::from_f64(c.beta2);
        let one = T::one();
        let decay = T::from_f64(1.0 - lr * c.weight_decay);
        let step_size = T::from_f64(lr / bc1);
        let inv_sqrt_bc2 = T::from_f64(1.0 / bc2.sqrt());
        let eps = T::from_f64(c.eps);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let denom = vi.sqrt() * inv_sqrt_bc2 + eps;
                *pi = *pi * decay - step_size * *mi / denom;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_zero_decay_is_identity() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut params = vec![Tensor::<f64>::from_fn(&[4], |i| i as f64 - 1.5)];
        let before = params.clone();
        let mut st = OptimizerState::new(cfg, &params);
        st.step(&mut params, &[Tensor::zeros(&[4])], 1e-3).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let grads = [Tensor::<f64>::new(vec![3], vec![0.3, -2.0, 1e-3]).unwrap()];
        let mut params = vec![Tensor::<f64>::zeros(&[3])];
        let mut st = OptimizerState::new(cfg, &params);
        let lr = 8e-5;
        st.step(&mut params, &grads, lr).unwrap();
        for (&p, &g) in params[0].data().iter().zip(grads[0].data()) {
            // m_hat = g and v_hat = g^2 after one step.
            let expected = -lr * g / (g.abs() + cfg.eps);
            assert!((p - expected).abs() < 1e-12, "{p} vs {expected}");
            assert!((p + lr * g.signum()).abs() < lr * 1e-4);
        }
    }

    #[test]
    fn decay_only_shrinks_by_factor() {
        let cfg = AdamWConfig::default();
        let init = Tensor::<f64>::from_fn(&[5], |i| 0.5 + i as f64);
        let mut params = vec![init.clone()];
        let mut st = OptimizerState::new(cfg, &params);
        let lr = 1e-2;
        st.step(&mut params, &[Tensor::zeros(&[5])], lr).unwrap();
        for (&p, &p0) in params[0].data().iter().zip(init.data()) {
            assert!((p - p0 * (1.0 - lr * cfg.weight_decay)).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut params = vec![Tensor::<f32>::filled(&[2], 1.0)];
        let mut st = OptimizerState::new(AdamWConfig::default(), &params);
        let bad = [Tensor::new(vec![2], vec![f32::NAN, 0.0]).unwrap()];
        assert!(matches!(
            st.step(&mut params, &bad, 1e-3),
            Err(NnError::NonFinite(_))
        ));
        assert_eq!(params[0].data(), &[1.0, 1.0]);
        assert_eq!(st.step, 0);
    }
}
