use cascade_core::datagen::{enrich_carry_cascade, gen_random_question};
use cascade_core::{answer_with_overrides, oracle_eval, Digit, Op, Question, QuestionClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{InterpError, Result};
use crate::subtask::SubtaskKind;

const MAX_ATTEMPTS: usize = 10_000;
/// Base questions tried before concluding that no valid pair exists.
const NO_PAIR_ATTEMPTS: usize = 20_000;

/// A purpose-built question set. `labels`, when present, run parallel to
/// `questions`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub purpose: String,
    pub recipe: String,
    pub n_digits: usize,
    pub questions: Vec<Question>,
    pub labels: Option<Vec<usize>>,
}

/// Base/donor pairs for interchange interventions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub kind: SubtaskKind,
    pub digit: usize,
    pub n_digits: usize,
    pub pairs: Vec<(Question, Question)>,
}

pub(crate) fn rng_for(seed: u64, salt: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in salt.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn op_of(class: QuestionClass) -> Op {
    match class {
        QuestionClass::Add => Op::Add,
        _ => Op::Sub,
    }
}

/// Swaps operands when needed so a subtraction lands in `class`. Returns
/// `None` for equal operands asked to be negative.
fn coerce_class(mut q: Question, class: QuestionClass) -> Option<Question> {
    if QuestionClass::of(&q) != class {
        std::mem::swap(&mut q.d, &mut q.d_prime);
    }
    (QuestionClass::of(&q) == class).then_some(q)
}

/// Sets digit pairs equal at each non-units position with probability 0.5,
/// lengthening borrow cascades.
fn enrich_borrow_cascade(q: &Question, rng: &mut impl Rng) -> Question {
    let mut out = q.clone();
    for k in 1..q.n_digits() {
        if rng.random_bool(0.5) {
            out.d_prime.set_digit(k, out.d.digit(k));
        }
    }
    out
}

pub fn random_question_of(n_digits: usize, class: QuestionClass, rng: &mut impl Rng) -> Question {
    loop {
        let q = gen_random_question(n_digits, op_of(class), rng);
        if let Some(q) = coerce_class(q, class) {
            return q;
        }
    }
}

impl ProbeSet {
    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    /// Questions of one class, half uniform and half cascade-enriched so
    /// rare long carry or borrow chains are exercised.
    pub fn class_probe(n_digits: usize, class: QuestionClass, size: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, class.name());
        let questions = (0..size)
            .map(|i| {
                let q = random_question_of(n_digits, class, &mut rng);
                if i % 2 == 0 {
                    return q;
                }
                loop {
                    let e = match class {
                        QuestionClass::Add => enrich_carry_cascade(&q, &mut rng),
                        _ => enrich_borrow_cascade(&q, &mut rng),
                    };
                    if let Some(e) = coerce_class(e, class) {
                        return e;
                    }
                }
            })
            .collect();
        ProbeSet {
            purpose: format!("ablation probe, {}", class.name()),
            recipe: "alternating uniform and cascade-enriched questions".into(),
            n_digits,
            questions,
            labels: None,
        }
    }

    /// Uniform questions with `sub_fraction` subtraction, for mean ablation.
    pub fn reference(n_digits: usize, sub_fraction: f64, size: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, "reference");
        let questions = (0..size)
            .map(|_| {
                let op = if rng.random::<f64>() < sub_fraction {
                    Op::Sub
                } else {
                    Op::Add
                };
                gen_random_question(n_digits, op, &mut rng)
            })
            .collect();
        ProbeSet {
            purpose: "mean-ablation reference".into(),
            recipe: format!("uniform, subtraction fraction {sub_fraction}"),
            n_digits,
            questions,
            labels: None,
        }
    }

    /// `per_value` questions for each value of `kind` at digit `k`, other
    /// digits uniform. Labels use the kind's own values.
    pub fn labeled(
        kind: SubtaskKind,
        k: usize,
        n_digits: usize,
        per_value: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::labeled_by(kind, k, n_digits, per_value, seed, false)
    }

    /// As [`ProbeSet::labeled`] but partitioned by the digit pair's
    /// tri-state case, to score a node under the three-way split.
    pub fn tri_labeled(
        kind: SubtaskKind,
        k: usize,
        n_digits: usize,
        per_value: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::labeled_by(kind, k, n_digits, per_value, seed, true)
    }

    fn labeled_by(
        kind: SubtaskKind,
        k: usize,
        n_digits: usize,
        per_value: usize,
        seed: u64,
        tri: bool,
    ) -> Result<Self> {
        let class = kind
            .class()
            .ok_or_else(|| InterpError::Probe(format!("{kind} has no labeled values")))?;
        if k >= n_digits {
            return Err(InterpError::Probe(format!("digit {k} out of range")));
        }
        let n_values = if tri { 3 } else { kind.n_values() };
        let label_of = |q: &Question| {
            if tri {
                Some(kind.tri_label(q, k))
            } else {
                kind.label(q, k)
            }
        };
        let mut rng = rng_for(seed, &format!("{kind}{k}{tri}"));
        let mut questions = Vec::with_capacity(per_value * n_values);
        let mut labels = Vec::with_capacity(per_value * n_values);
        for value in 0..n_values {
            let mut found = 0;
            let mut attempts = 0;
            while found < per_value {
                attempts += 1;
                if attempts > MAX_ATTEMPTS * per_value.max(1) {
                    // Some values cannot occur, e.g. an uncertain carry at
                    // the units digit.
                    break;
                }
                let mut q = random_question_of(n_digits, class, &mut rng);
                if kind != SubtaskKind::SV {
                    q.d.set_digit(k, Digit::wrapping(rng.random_range(0..10)));
                    q.d_prime
                        .set_digit(k, Digit::wrapping(rng.random_range(0..10)));
                }
                if QuestionClass::of(&q) == class && label_of(&q) == Some(value) {
                    questions.push(q);
                    labels.push(value);
                    found += 1;
                }
            }
        }
        Ok(ProbeSet {
            purpose: format!(
                "{kind}{k} {} probe",
                if tri { "tri-state" } else { "value" }
            ),
            recipe: format!("{per_value} questions per value, other digits uniform"),
            n_digits,
            questions,
            labels: Some(labels),
        })
    }
}

/// Draws a donor for `base` by resampling the subtask's input digits until
/// the pair predicate holds and the two values differ.
pub fn sample_donor(
    kind: SubtaskKind,
    k: usize,
    base: &Question,
    rng: &mut impl Rng,
) -> Option<Question> {
    let free = if kind == SubtaskKind::SV {
        0..=k
    } else {
        k..=k
    };
    for _ in 0..200 {
        let mut donor = base.clone();
        for i in free.clone() {
            donor
                .d
                .set_digit(i, Digit::wrapping(rng.random_range(0..10)));
            donor
                .d_prime
                .set_digit(i, Digit::wrapping(rng.random_range(0..10)));
        }
        if donor != *base && kind.pair_problem(k, base, &donor).is_none() {
            return Some(donor);
        }
    }
    None
}

impl PairSet {
    /// `count` valid pairs whose cascade-predicted answer differs from the
    /// base answer, so a successful swap is observable. The set is empty
    /// when no such pair turns up at all, as for a top-digit borrow whose
    /// change would also change the question's class.
    pub fn informative(
        kind: SubtaskKind,
        k: usize,
        n_digits: usize,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        let class = kind
            .class()
            .ok_or_else(|| InterpError::Probe(format!("{kind} has no interchange pairs")))?;
        let mut rng = rng_for(seed, &format!("pairs{kind}{k}"));
        let mut pairs = Vec::with_capacity(count);
        let mut attempts = 0;
        while pairs.len() < count {
            attempts += 1;
            if pairs.is_empty() && attempts > NO_PAIR_ATTEMPTS {
                break;
            }
            if attempts > MAX_ATTEMPTS * count.max(1) {
                return Err(InterpError::Probe(format!(
                    "could not find {count} informative {kind}{k} pairs"
                )));
            }
            let base = random_question_of(n_digits, class, &mut rng);
            let Some(donor) = sample_donor(kind, k, &base, &mut rng) else {
                continue;
            };
            if answer_with_overrides(&base, &kind.overrides(&donor, k)) != oracle_eval(&base) {
                pairs.push((base, donor));
            }
        }
        Ok(PairSet {
            kind,
            digit: k,
            n_digits,
            pairs,
        })
    }
}
