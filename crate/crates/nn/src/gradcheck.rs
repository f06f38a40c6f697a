//! Central-difference gradient verification.

use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Compares reverse-mode gradients of a scalar function against central
/// differences. `build` receives a fresh tape plus one leaf per input and
/// returns the scalar output. Returns the worst norm-wise relative error
/// `|g_ad - g_fd| / max(|g_ad|, |g_fd|, floor)` over all inputs.
pub fn max_relative_error<F>(inputs: &[Tensor<f64>], step: f64, build: F) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let eval = |vals: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|v| tape.leaf(v.clone())).collect();
        let out = build(&mut tape, &vars);
        tape.value(out).item()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|v| tape.leaf(v.clone())).collect();
    let out = build(&mut tape, &vars);
    let grads = tape.backward(out);

    let mut worst: f64 = 0.0;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[i])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(input.shape()));
        let mut numeric = Vec::with_capacity(input.len());
        for j in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += step;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= step;
            numeric.push((eval(&plus) - eval(&minus)) / (2.0 * step));
        }
        let diff: f64 = analytic
            .data()
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let na = analytic.data().iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        worst = worst.max(diff / na.max(nn).max(1e-8));
    }
    worst
}
