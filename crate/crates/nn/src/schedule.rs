use serde::{Deserialize, Serialize};

/// Linear warmup from `0.01 * base_lr` over the first fifth of training,
/// then cosine annealing to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl Schedule {
    pub fn new(base_lr: f64, total_steps: u64) -> Self {
        Schedule {
            base_lr,
            warmup_steps: total_steps / 5,
            total_steps,
        }
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        let step = step.min(self.total_steps);
        if step < self.warmup_steps {
            let frac = step as f64 / self.warmup_steps as f64;
            return self.base_lr * (0.01 + 0.99 * frac);
        }
        let span = (self.total_steps - self.warmup_steps).max(1) as f64;
        let progress = (step - self.warmup_steps) as f64 / span;
        0.5 * self.base_lr * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}
