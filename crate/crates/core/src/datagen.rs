//! Infinite enriched training stream.
//!
//! Every batch is a pure function of `(seed, step)`: the generator seeds a
//! ChaCha stream with `seed` and selects the stream number `step`, so runs
//! are reproducible and any step can be regenerated independently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::answer_via_cascade;
use crate::complexity::{classify_complexity, Quantum};
use crate::error::{ArithError, Result};
use crate::question::{encode_example, Answer, Digit, Op, Operand, Question};
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curriculum {
    pub add: f64,
    pub sub: f64,
}

impl Curriculum {
    pub fn add_only() -> Self {
        Curriculum { add: 1.0, sub: 0.0 }
    }

    pub fn sub_only() -> Self {
        Curriculum { add: 0.0, sub: 1.0 }
    }

    /// 80% subtraction, 20% addition.
    pub fn mixed() -> Self {
        Curriculum { add: 0.2, sub: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnrichmentConfig {
    pub n_digits: usize,
    pub enriched_fraction: f64,
    pub equal_operand_freq: f64,
    pub curriculum: Curriculum,
    pub seed: u64,
}

impl Default for EnrichmentConfig {
    fn default() -> Self {
        EnrichmentConfig {
            n_digits: 5,
            enriched_fraction: 0.6,
            equal_operand_freq: 0.006,
            curriculum: Curriculum::add_only(),
            seed: 372001,
        }
    }
}

impl EnrichmentConfig {
    pub fn new(n_digits: usize, curriculum: Curriculum, seed: u64) -> Self {
        EnrichmentConfig {
            n_digits,
            curriculum,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(ArithError::InvalidConfig(format!(
                    "{name} = {p} is not a probability"
                )))
            }
        };
        if self.n_digits == 0 {
            return Err(ArithError::ZeroDigits);
        }
        prob("enriched_fraction", self.enriched_fraction)?;
        prob("equal_operand_freq", self.equal_operand_freq)?;
        prob("curriculum.add", self.curriculum.add)?;
        prob("curriculum.sub", self.curriculum.sub)?;
        if (self.curriculum.add + self.curriculum.sub - 1.0).abs() > 1e-9 {
            return Err(ArithError::InvalidConfig(
                "curriculum weights must sum to 1".to_string(),
            ));
        }
        Ok(())
    }
}

pub fn gen_random_question(n_digits: usize, op: Op, rng: &mut impl Rng) -> Question {
    let mut operand = || {
        let digits = (0..n_digits)
            .map(|_| Digit::wrapping(rng.random_range(0..10)))
            .collect();
        Operand::from_digits(digits).expect("n_digits >= 1")
    };
    let d = operand();
    let d_prime = operand();
    Question { op, d, d_prime }
}

/// Picks one operand and, at each non-units position independently with
/// probability 0.5, rewrites its digit so the pair sums to 9. A units pair
/// summing to 9 can never receive a carry, so it is left alone.
pub fn enrich_carry_cascade(q: &Question, rng: &mut impl Rng) -> Question {
    let mut out = q.clone();
    let rewrite_first = rng.random_bool(0.5);
    for k in 1..q.n_digits() {
        if !rng.random_bool(0.5) {
            continue;
        }
        if rewrite_first {
            let other = out.d_prime.digit(k).value();
            out.d.set_digit(k, Digit::wrapping(9 - other as i64));
        } else {
            let other = out.d.digit(k).value();
            out.d_prime.set_digit(k, Digit::wrapping(9 - other as i64));
        }
    }
    out
}

/// Increments every digit of `D'` that is 8 or less.
pub fn enrich_negative_answer(q: &Question) -> Question {
    let mut out = q.clone();
    for k in 0..q.n_digits() {
        let v = out.d_prime.digit(k).value();
        if v <= 8 {
            out.d_prime.set_digit(k, Digit::wrapping(v as i64 + 1));
        }
    }
    out
}

/// Sets `D' := D`.
pub fn enrich_equal_operands(q: &Question) -> Question {
    let mut out = q.clone();
    out.d_prime = out.d.clone();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Enrichment {
    CarryCascade,
    NegativeAnswer,
}

fn enrichments_for(op: Op) -> &'static [Enrichment] {
    match op {
        Op::Add => &[Enrichment::CarryCascade],
        Op::Sub => &[Enrichment::NegativeAnswer],
    }
}

/// Draws one training question: operator per curriculum, then equal-operand
/// injection (subtraction only), otherwise enrichment with
/// `enriched_fraction`, chosen uniformly among the enrichments valid for the
/// operator.
pub fn gen_training_question(cfg: &EnrichmentConfig, rng: &mut impl Rng) -> Question {
    let op = if rng.random::<f64>() < cfg.curriculum.sub {
        Op::Sub
    } else {
        Op::Add
    };
    let q = gen_random_question(cfg.n_digits, op, rng);
    if op == Op::Sub && rng.random::<f64>() < cfg.equal_operand_freq {
        return enrich_equal_operands(&q);
    }
    if rng.random::<f64>() >= cfg.enriched_fraction {
        return q;
    }
    let options = enrichments_for(op);
    match options[rng.random_range(0..options.len())] {
        Enrichment::CarryCascade => enrich_carry_cascade(&q, rng),
        Enrichment::NegativeAnswer => enrich_negative_answer(&q),
    }
}

/// RNG for `(seed, step)`.
pub fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub n_digits: usize,
    pub questions: Vec<Question>,
    pub answers: Vec<Answer>,
    /// Row-major `batch_size x (3n + 4)` token ids.
    pub tokens: Vec<TokenId>,
    pub complexity: Vec<Quantum>,
}

impl Batch {
    pub fn from_questions(n_digits: usize, questions: Vec<Question>) -> Self {
        let answers: Vec<Answer> = questions.iter().map(answer_via_cascade).collect();
        #[cfg(debug_assertions)]
        for (q, a) in questions.iter().zip(&answers) {
            debug_assert_eq!(
                *a,
                crate::oracle::oracle_eval(q),
                "cascade disagrees on {q}"
            );
        }
        let tokens = questions
            .iter()
            .zip(&answers)
            .flat_map(|(q, a)| encode_example(q, a))
            .collect();
        let complexity = questions.iter().map(classify_complexity).collect();
        Batch {
            n_digits,
            questions,
            answers,
            tokens,
            complexity,
        }
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        3 * self.n_digits + 4
    }

    pub fn row(&self, i: usize) -> &[TokenId] {
        let t = self.seq_len();
        &self.tokens[i * t..(i + 1) * t]
    }

    /// Answer-token targets, row-major `batch_size x (n + 2)`.
    pub fn targets(&self) -> Vec<TokenId> {
        let q_len = 2 * self.n_digits + 2;
        (0..self.len())
            .flat_map(|i| self.row(i)[q_len..].to_vec())
            .collect()
    }
}

pub fn gen_batch(cfg: &EnrichmentConfig, batch_size: usize, step: u64) -> Batch {
    let mut rng = step_rng(cfg.seed, step);
    let questions = (0..batch_size)
        .map(|_| gen_training_question(cfg, &mut rng))
        .collect();
    Batch::from_questions(cfg.n_digits, questions)
}

/// Uniform (non-enriched) questions, used for evaluation.
pub fn gen_uniform_batch(
    n_digits: usize,
    curriculum: Curriculum,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Batch {
    let questions = (0..batch_size)
        .map(|_| {
            let op = if rng.random::<f64>() < curriculum.sub {
                Op::Sub
            } else {
                Op::Add
            };
            gen_random_question(n_digits, op, rng)
        })
        .collect();
    Batch::from_questions(n_digits, questions)
}
