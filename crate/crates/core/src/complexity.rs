//! Calculation-complexity quanta (`S_k` for addition, `M_k` / `N_k` for
//! positive / negative subtraction).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::question::{Op, Question};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionClass {
    Add,
    SubPos,
    SubNeg,
}

impl QuestionClass {
    pub const ALL: [QuestionClass; 3] = [
        QuestionClass::Add,
        QuestionClass::SubPos,
        QuestionClass::SubNeg,
    ];

    pub fn prefix(self) -> char {
        match self {
            QuestionClass::Add => 'S',
            QuestionClass::SubPos => 'M',
            QuestionClass::SubNeg => 'N',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuestionClass::Add => "addition",
            QuestionClass::SubPos => "positive-answer subtraction",
            QuestionClass::SubNeg => "negative-answer subtraction",
        }
    }

    /// Classifies by operator and, for subtraction, by the sign of `D - D'`.
    /// Equal operands are positive.
    pub fn of(q: &Question) -> Self {
        match q.op {
            Op::Add => QuestionClass::Add,
            Op::Sub if q.d.digits() >= q.d_prime.digits() => QuestionClass::SubPos,
            Op::Sub => QuestionClass::SubNeg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Quantum {
    pub class: QuestionClass,
    pub level: usize,
}

impl fmt::Display for Quantum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.class.prefix(), self.level)
    }
}

/// How the quantum level is counted from the carry (or borrow) pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ComplexityMeasure {
    /// Longest run of consecutive positions whose exact carry-out is 1.
    #[default]
    LongestRun,
    /// Number of positions whose digit pair generates a carry on its own
    /// (`D + D' >= 10`, or `D < D'` for borrows), ignoring propagation.
    GeneratedCount,
}

/// Exact carry (addition) or borrow (subtraction) out of every position,
/// units first. Negative subtractions are simulated as `D' - D`.
pub fn simulate_carries(q: &Question) -> Vec<u8> {
    let n = q.n_digits();
    let class = QuestionClass::of(q);
    let mut out = Vec::with_capacity(n);
    let mut carry = 0i32;
    for i in 0..n {
        let (a, b) = pair(q, class, i);
        carry = match class {
            QuestionClass::Add => (a + b + carry >= 10) as i32,
            _ => (a - b - carry < 0) as i32,
        };
        out.push(carry as u8);
    }
    out
}

fn pair(q: &Question, class: QuestionClass, i: usize) -> (i32, i32) {
    let (a, b) = (
        q.d.digit(i).value() as i32,
        q.d_prime.digit(i).value() as i32,
    );
    if class == QuestionClass::SubNeg {
        (b, a)
    } else {
        (a, b)
    }
}

pub fn classify_complexity(q: &Question) -> Quantum {
    classify_with(q, ComplexityMeasure::LongestRun)
}

pub fn classify_with(q: &Question, measure: ComplexityMeasure) -> Quantum {
    let class = QuestionClass::of(q);
    let level = match measure {
        ComplexityMeasure::LongestRun => {
            let mut best = 0;
            let mut run = 0;
            for c in simulate_carries(q) {
                run = if c == 1 { run + 1 } else { 0 };
                best = best.max(run);
            }
            best
        }
        ComplexityMeasure::GeneratedCount => (0..q.n_digits())
            .filter(|&i| {
                let (a, b) = pair(q, class, i);
                match class {
                    QuestionClass::Add => a + b >= 10,
                    _ => a < b,
                }
            })
            .count(),
    };
    Quantum { class, level }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(text: &str) -> String {
        classify_complexity(&Question::parse(text, None).unwrap()).to_string()
    }

    #[test]
    fn addition_quanta() {
        assert_eq!(label("11111+12345"), "S0");
        assert_eq!(label("11111+88889"), "S5");
        assert_eq!(label("11111+89"), "S2");
    }

    #[test]
    fn subtraction_quanta() {
        assert_eq!(label("555-111"), "M0");
        assert_eq!(label("325-129"), "M2");
        assert_eq!(label("325-329"), "N0");
        assert_eq!(label("100-001"), "M2");
        assert_eq!(label("001-100"), "N2");
        assert_eq!(label("777-777"), "M0");
    }

    #[test]
    fn generated_count_ignores_propagation() {
        let q = Question::parse("11111+88889", None).unwrap();
        assert_eq!(
            classify_with(&q, ComplexityMeasure::GeneratedCount).level,
            1
        );
        let q = Question::parse("99999+11111", None).unwrap();
        assert_eq!(
            classify_with(&q, ComplexityMeasure::GeneratedCount).level,
            5
        );
    }
}
