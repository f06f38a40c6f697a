//! Arbitrary-precision reference evaluator, independent of the cascade code.

use num_bigint::BigUint;

use crate::question::{Answer, Digit, Op, Operand, Question, Sign};

fn to_biguint(op: &Operand) -> BigUint {
    op.digits()
        .iter()
        .fold(BigUint::from(0u32), |acc, d| acc * 10u32 + d.value() as u32)
}

/// Exact integer add/sub formatted with `n + 1` answer digits. Zero is
/// always positive.
pub fn oracle_eval(q: &Question) -> Answer {
    let a = to_biguint(&q.d);
    let b = to_biguint(&q.d_prime);
    let (sign, magnitude) = match q.op {
        Op::Add => (Sign::Plus, a + b),
        Op::Sub if a >= b => (Sign::Plus, a - b),
        Op::Sub => (Sign::Minus, b - a),
    };
    let text = magnitude.to_str_radix(10);
    let width = q.n_digits() + 1;
    assert!(text.len() <= width, "result wider than n + 1 digits");
    let digits = format!("{text:0>width$}")
        .bytes()
        .map(|b| Digit::wrapping((b - b'0') as i64))
        .collect();
    Answer { sign, digits }
}
