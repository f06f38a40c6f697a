use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Result, TrainError};
use crate::trainer::train;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub seed: u64,
    pub final_loss: f64,
    pub steps_run: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub category: String,
    pub runs: Vec<SweepRun>,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
}

impl SweepSummary {
    pub fn from_runs(category: &str, runs: Vec<SweepRun>) -> Self {
        let mut losses: Vec<f64> = runs.iter().map(|r| r.final_loss).collect();
        losses.sort_by(f64::total_cmp);
        let n = losses.len() as f64;
        let mid = losses.len() / 2;
        let median = if losses.len() % 2 == 0 {
            0.5 * (losses[mid - 1] + losses[mid])
        } else {
            losses[mid]
        };
        let mean = losses.iter().sum::<f64>() / n;
        let variance = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
        SweepSummary {
            category: category.to_string(),
            min: losses[0],
            median,
            max: losses[losses.len() - 1],
            mean,
            variance,
            runs,
        }
    }
}

/// Independent training runs that differ only in seed (model init and data
/// stream). Runs are spread over `workers` threads.
pub fn seed_sweep(
    cfg: &TrainConfig,
    seeds: &[u64],
    category: &str,
    workers: usize,
) -> Result<SweepSummary> {
    if seeds.len() < 2 {
        return Err(TrainError::InvalidConfig(
            "a sweep needs at least two seeds".into(),
        ));
    }
    let workers = workers.clamp(1, seeds.len());
    let run_one = |seed: u64| -> Result<SweepRun> {
        let mut c = cfg.clone();
        c.model.seed = seed;
        c.data.seed = seed;
        let out = train(&c, None, &mut |_| {})?;
        Ok(SweepRun {
            seed,
            final_loss: out.log.final_.loss,
            steps_run: out.log.final_.steps_run,
        })
    };
    let mut results: Vec<Option<Result<SweepRun>>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run_one = &run_one;
                s.spawn(move || {
                    (w..seeds.len())
                        .step_by(workers)
                        .map(|i| (i, run_one(seeds[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sweep worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let runs = results
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepSummary::from_runs(category, runs))
}
