//! Exact binomial confidence intervals.

use statrs::function::beta::beta_reg;

/// Inverts the regularised incomplete beta function by bisection.
fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Clopper–Pearson interval for `fails` failures out of `n` trials.
pub fn clopper_pearson(fails: u64, n: u64, confidence: f64) -> (f64, f64) {
    assert!(fails <= n && n > 0, "need 0 <= fails <= n and n > 0");
    let alpha = 1.0 - confidence;
    let (x, nf) = (fails as f64, n as f64);
    let lower = if fails == 0 {
        0.0
    } else {
        beta_quantile(alpha / 2.0, x, nf - x + 1.0)
    };
    let upper = if fails == n {
        1.0
    } else {
        beta_quantile(1.0 - alpha / 2.0, x + 1.0, nf - x)
    };
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_failures_match_closed_form() {
        for n in [1u64, 10, 1000, 1_000_000] {
            let (lo, hi) = clopper_pearson(0, n, 0.95);
            assert_eq!(lo, 0.0);
            let closed = 1.0 - 0.025f64.powf(1.0 / n as f64);
            assert!(
                (hi - closed).abs() <= 1e-9 * closed,
                "{n}: {hi} vs {closed}"
            );
        }
    }

    #[test]
    fn all_failures_upper_is_one() {
        let (lo, hi) = clopper_pearson(20, 20, 0.95);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.025f64.powf(1.0 / 20.0)).abs() < 1e-9);
    }

    #[test]
    fn interval_brackets_estimate() {
        for (f, n) in [(1u64, 7u64), (5, 100), (12621, 1_000_000)] {
            let (lo, hi) = clopper_pearson(f, n, 0.95);
            let p = f as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
    }
}
