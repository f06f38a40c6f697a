use std::collections::BTreeMap;
use std::fmt::Write as _;

use cascade_core::datagen::gen_uniform_batch;
use cascade_core::question::canonical_line;
use cascade_core::{
    answer_via_cascade, classify_with, Batch, ComplexityMeasure, Curriculum, Op, Quantum,
    QuestionClass, TokenId,
};
use cascade_model::Transformer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::clopper_pearson;

const CHUNK: usize = 500;
const MAX_LISTED_FAILURES: usize = 100;

/// Anything that produces answer tokens for a batch of questions.
pub trait Answerer {
    fn answer_tokens(&self, batch: &Batch) -> Result<Vec<Vec<TokenId>>>;
}

/// Teacher-forced argmax. A row matches its targets exactly when greedy
/// decoding would produce the same answer.
impl Answerer for Transformer {
    fn answer_tokens(&self, batch: &Batch) -> Result<Vec<Vec<TokenId>>> {
        Ok(self.teacher_forced_predictions(&batch.tokens, batch.len())?)
    }
}

/// The symbolic cascade standing in for a model.
pub struct CascadeAnswerer;

impl Answerer for CascadeAnswerer {
    fn answer_tokens(&self, batch: &Batch) -> Result<Vec<Vec<TokenId>>> {
        Ok(batch
            .questions
            .iter()
            .map(|q| answer_via_cascade(q).encode())
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub n: u64,
    pub fails: u64,
    pub accuracy: f64,
    /// Clopper–Pearson 95% interval on the failure rate.
    pub interval: (f64, f64),
}

impl Tally {
    fn new(n: u64, fails: u64) -> Self {
        let (accuracy, interval) = if n == 0 {
            (f64::NAN, (0.0, 1.0))
        } else {
            (
                1.0 - fails as f64 / n as f64,
                clopper_pearson(fails, n, 0.95),
            )
        };
        Tally {
            n,
            fails,
            accuracy,
            interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumTally {
    pub quantum: String,
    pub n: u64,
    pub fails: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_digits: usize,
    pub n_questions: u64,
    pub seed: u64,
    pub curriculum: Curriculum,
    pub total: Tally,
    pub classes: BTreeMap<QuestionClass, Tally>,
    pub quanta: Vec<QuantumTally>,
    /// Up to 100 failing questions as `question=expected got predicted`.
    pub failures: Vec<String>,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,n,fails,accuracy,ci_low,ci_high\n");
        let mut row = |name: &str, t: &Tally| {
            let _ = writeln!(
                out,
                "{name},{},{},{},{:.3e},{:.3e}",
                t.n, t.fails, t.accuracy, t.interval.0, t.interval.1
            );
        };
        row("all", &self.total);
        for (class, t) in &self.classes {
            row(&format!("{class:?}"), t);
        }
        for q in &self.quanta {
            let t = Tally::new(q.n, q.fails);
            row(&q.quantum, &t);
        }
        out
    }
}

fn render(tokens: &[TokenId]) -> String {
    cascade_core::vocab::render(tokens).unwrap_or_else(|_| format!("{tokens:?}"))
}

/// Accuracy over `n_questions` uniform questions drawn with `seed`.
/// A question fails when any answer token differs from the oracle.
pub fn evaluate(
    model: &dyn Answerer,
    n_digits: usize,
    n_questions: u64,
    curriculum: Curriculum,
    seed: u64,
) -> Result<EvalReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut class_counts: BTreeMap<QuestionClass, (u64, u64)> = BTreeMap::new();
    let mut quanta: BTreeMap<Quantum, (u64, u64)> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut done = 0u64;
    while done < n_questions {
        let size = (n_questions - done).min(CHUNK as u64) as usize;
        let batch = gen_uniform_batch(n_digits, curriculum, size, &mut rng);
        let predicted = model.answer_tokens(&batch)?;
        for (i, q) in batch.questions.iter().enumerate() {
            let expected = batch.answers[i].encode();
            let ok = predicted[i] == expected;
            let class = QuestionClass::of(q);
            let quantum = classify_with(q, ComplexityMeasure::LongestRun);
            let c = class_counts.entry(class).or_default();
            let k = quanta.entry(quantum).or_default();
            c.0 += 1;
            k.0 += 1;
            if !ok {
                c.1 += 1;
                k.1 += 1;
                if failures.len() < MAX_LISTED_FAILURES {
                    failures.push(format!(
                        "{} got {}",
                        canonical_line(q, &batch.answers[i]),
                        render(&predicted[i])
                    ));
                }
            }
        }
        done += size as u64;
    }
    let total_fails = class_counts.values().map(|c| c.1).sum();
    Ok(EvalReport {
        n_digits,
        n_questions,
        seed,
        curriculum,
        total: Tally::new(n_questions, total_fails),
        classes: class_counts
            .into_iter()
            .map(|(k, (n, f))| (k, Tally::new(n, f)))
            .collect(),
        quanta: quanta
            .into_iter()
            .map(|(q, (n, fails))| QuantumTally {
                quantum: q.to_string(),
                n,
                fails,
            })
            .collect(),
        failures,
    })
}

/// Monte-Carlo frequency of each complexity quantum under uniform questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub n_digits: usize,
    pub samples: u64,
    pub measure: ComplexityMeasure,
    pub counts: BTreeMap<Quantum, u64>,
}

impl Histogram {
    pub fn frequency(&self, quantum: Quantum) -> f64 {
        self.counts.get(&quantum).copied().unwrap_or(0) as f64 / self.samples as f64
    }

    pub fn frequencies(&self) -> Vec<(Quantum, f64)> {
        self.counts
            .iter()
            .map(|(&q, &c)| (q, c as f64 / self.samples as f64))
            .collect()
    }
}

pub fn complexity_histogram(
    n_digits: usize,
    op: Op,
    samples: u64,
    measure: ComplexityMeasure,
    seed: u64,
) -> Histogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..samples {
        let q = cascade_core::datagen::gen_random_question(n_digits, op, &mut rng);
        *counts.entry(classify_with(&q, measure)).or_insert(0) += 1;
    }
    Histogram {
        n_digits,
        samples,
        measure,
        counts,
    }
}
