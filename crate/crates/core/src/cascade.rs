//! Exact cascade algorithms for addition and subtraction.
//!
//! Addition resolves every multi-digit carry with tri-state values: each
//! digit pair is classified as definitely carrying, definitely not carrying,
//! or uncertain (pair sums to 9), and the classes are folded from the most
//! significant digit downwards. Subtraction mirrors this with borrows, and the
//! resolved top borrow selects both the answer sign and which difference
//! digits to emit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::question::{Answer, Digit, Op, Question, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriState {
    Zero,
    One,
    Uncertain,
}

impl TriState {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            TriState::Zero
        } else {
            TriState::One
        }
    }

    pub fn bit(self) -> Option<u8> {
        match self {
            TriState::Zero => Some(0),
            TriState::One => Some(1),
            TriState::Uncertain => None,
        }
    }

    /// Stable small-integer label (0, 1, 2 for U), used for class labels.
    pub fn label(self) -> usize {
        match self {
            TriState::Zero => 0,
            TriState::One => 1,
            TriState::Uncertain => 2,
        }
    }
}

/// Base add: `(a + b) mod 10`.
pub fn sa(a: Digit, b: Digit) -> Digit {
    Digit::wrapping(a.value() as i64 + b.value() as i64)
}

/// Single-digit carry: 1 iff `a + b >= 10`.
pub fn sc(a: Digit, b: Digit) -> u8 {
    (a.value() + b.value() >= 10) as u8
}

/// Carry tri-case. The units position can never receive a carry, so a sum
/// of 9 there resolves to `Zero`.
pub fn st(a: Digit, b: Digit, position: usize) -> TriState {
    let sum = a.value() + b.value();
    if sum >= 10 {
        TriState::One
    } else if sum <= 8 || position == 0 {
        TriState::Zero
    } else {
        TriState::Uncertain
    }
}

/// Returns `y` when `x` is uncertain, otherwise `x`.
pub fn tri_add(x: TriState, y: TriState) -> TriState {
    match x {
        TriState::Uncertain => y,
        _ => x,
    }
}

/// Left fold of [`tri_add`] over `values`, ordered from the highest digit
/// down to digit 0.
pub fn tri_fold(values: impl IntoIterator<Item = TriState>) -> TriState {
    let mut iter = values.into_iter();
    let first = iter.next().unwrap_or(TriState::Zero);
    iter.fold(first, tri_add)
}

fn resolve(state: TriState) -> u8 {
    // The fold always ends with a position-0 value, which is never uncertain.
    state
        .bit()
        .expect("cascade fold ended on an uncertain value")
}

/// Multi-digit carry out of digit `k`: `TriAdd(...TriAdd(ST_k, ST_{k-1})..., ST_0)`.
pub fn sv(q: &Question, k: usize) -> u8 {
    assert!(k < q.n_digits(), "digit index {k} out of range");
    resolve(tri_fold(
        (0..=k)
            .rev()
            .map(|i| st(q.d.digit(i), q.d_prime.digit(i), i)),
    ))
}

/// `(a - b) mod 10`. Serves as MD with `(D, D')` and ND with `(D', D)`.
pub fn diff_mod10(a: Digit, b: Digit) -> Digit {
    Digit::wrapping(a.value() as i64 - b.value() as i64)
}

/// Borrow tri-case. Serves as MB with `(D, D')` and NB with `(D', D)`.
/// Equal digits at the units position generate no borrow.
pub fn tricase_borrow(a: Digit, b: Digit, position: usize) -> TriState {
    if a < b {
        TriState::One
    } else if a > b || position == 0 {
        TriState::Zero
    } else {
        TriState::Uncertain
    }
}

/// Multi-digit borrow out of digit `k`, over the MB series (`negated =
/// false`, computing `D - D'`) or the NB series (`negated = true`, `D' - D`).
pub fn mv(q: &Question, k: usize, negated: bool) -> u8 {
    assert!(k < q.n_digits(), "digit index {k} out of range");
    resolve(tri_fold((0..=k).rev().map(|i| {
        let (a, b) = operands_at(q, i, negated);
        tricase_borrow(a, b, i)
    })))
}

fn operands_at(q: &Question, i: usize, negated: bool) -> (Digit, Digit) {
    if negated {
        (q.d_prime.digit(i), q.d.digit(i))
    } else {
        (q.d.digit(i), q.d_prime.digit(i))
    }
}

pub fn add_via_cascade(q: &Question) -> Answer {
    debug_assert_eq!(q.op, Op::Add);
    answer_with_overrides(q, &Overrides::default())
}

pub fn sub_via_cascade(q: &Question) -> Answer {
    debug_assert_eq!(q.op, Op::Sub);
    answer_with_overrides(q, &Overrides::default())
}

/// Dispatches on the question's operator.
pub fn answer_via_cascade(q: &Question) -> Answer {
    answer_with_overrides(q, &Overrides::default())
}

/// Subtask values substituted into the cascade, keyed by digit index.
///
/// Used to compute the expected effect of an interchange intervention: the
/// symbolic algorithm is re-run with one subtask value taken from a donor
/// question.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub st: BTreeMap<usize, TriState>,
    pub sa: BTreeMap<usize, Digit>,
    pub mb: BTreeMap<usize, TriState>,
    pub nb: BTreeMap<usize, TriState>,
    pub md: BTreeMap<usize, Digit>,
    pub nd: BTreeMap<usize, Digit>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.st.is_empty()
            && self.sa.is_empty()
            && self.mb.is_empty()
            && self.nb.is_empty()
            && self.md.is_empty()
            && self.nd.is_empty()
    }
}

/// Runs the cascade algorithm for `q` with any overridden subtask values.
pub fn answer_with_overrides(q: &Question, ov: &Overrides) -> Answer {
    let n = q.n_digits();
    match q.op {
        Op::Add => {
            let tri: Vec<TriState> = (0..n)
                .map(|i| {
                    ov.st
                        .get(&i)
                        .copied()
                        .unwrap_or_else(|| st(q.d.digit(i), q.d_prime.digit(i), i))
                })
                .collect();
            let base: Vec<Digit> = (0..n)
                .map(|i| {
                    ov.sa
                        .get(&i)
                        .copied()
                        .unwrap_or_else(|| sa(q.d.digit(i), q.d_prime.digit(i)))
                })
                .collect();
            let carries = cascade_values(&tri);
            let mut digits = vec![Digit::from_bit(carries[n - 1])];
            for k in (0..n).rev() {
                let carry_in = if k == 0 { 0 } else { carries[k - 1] };
                digits.push(Digit::wrapping(base[k].value() as i64 + carry_in as i64));
            }
            Answer {
                sign: Sign::Plus,
                digits,
            }
        }
        Op::Sub => {
            let series = |negated: bool, map: &BTreeMap<usize, TriState>| -> Vec<TriState> {
                (0..n)
                    .map(|i| {
                        map.get(&i).copied().unwrap_or_else(|| {
                            let (a, b) = operands_at(q, i, negated);
                            tricase_borrow(a, b, i)
                        })
                    })
                    .collect()
            };
            let positive = cascade_values(&series(false, &ov.mb));
            let negative = positive[n - 1] == 1;
            let (borrows, diffs) = if negative {
                (cascade_values(&series(true, &ov.nb)), &ov.nd)
            } else {
                (positive, &ov.md)
            };
            let mut digits = vec![Digit::ZERO];
            for k in (0..n).rev() {
                let diff = diffs.get(&k).copied().unwrap_or_else(|| {
                    let (a, b) = operands_at(q, k, negative);
                    diff_mod10(a, b)
                });
                let borrow_in = if k == 0 { 0 } else { borrows[k - 1] };
                digits.push(Digit::wrapping(diff.value() as i64 - borrow_in as i64));
            }
            let sign = if negative { Sign::Minus } else { Sign::Plus };
            Answer { sign, digits }
        }
    }
}

/// Resolved cascade bits `V_0..V_{n-1}` for a tri-state series indexed by
/// digit. An override may leave position 0 uncertain; that resolves to 0,
/// matching the units-position rule.
fn cascade_values(tri: &[TriState]) -> Vec<u8> {
    (0..tri.len())
        .map(|k| tri_fold((0..=k).rev().map(|i| tri[i])).bit().unwrap_or(0))
        .collect()
}

impl Digit {
    fn from_bit(bit: u8) -> Digit {
        Digit::wrapping(bit as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::question::Question;

    fn d(v: u32) -> Digit {
        Digit::new(v).unwrap()
    }

    fn q(text: &str) -> Question {
        Question::parse(text, None).unwrap()
    }

    /// Schoolbook carry simulation, the brute-force reference for SV.
    fn carry_out(a: u64, b: u64, k: usize) -> u8 {
        let mut carry = 0;
        for i in 0..=k {
            let s = (a / 10u64.pow(i as u32)) % 10 + (b / 10u64.pow(i as u32)) % 10 + carry;
            carry = (s >= 10) as u64;
        }
        carry as u8
    }

    /// Schoolbook borrow simulation for `a - b`.
    fn borrow_out(a: u64, b: u64, k: usize) -> u8 {
        let mut borrow = 0i64;
        for i in 0..=k {
            let s = ((a / 10u64.pow(i as u32)) % 10) as i64
                - ((b / 10u64.pow(i as u32)) % 10) as i64
                - borrow;
            borrow = (s < 0) as i64;
        }
        borrow as u8
    }

    #[test]
    fn base_add_and_carry() {
        assert_eq!(sa(d(5), d(7)), d(2));
        assert_eq!(sa(d(0), d(0)), d(0));
        assert_eq!(sa(d(9), d(9)), d(8));
        assert_eq!(sc(d(5), d(7)), 1);
        assert_eq!(sc(d(2), d(3)), 0);
        assert_eq!(sc(d(5), d(5)), 1);
    }

    #[test]
    fn carry_tricase() {
        assert_eq!(st(d(6), d(7), 2), TriState::One);
        assert_eq!(st(d(5), d(4), 1), TriState::Uncertain);
        assert_eq!(st(d(5), d(4), 0), TriState::Zero);
        assert_eq!(st(d(1), d(2), 3), TriState::Zero);
    }

    #[test]
    fn tri_add_table() {
        use TriState::*;
        assert_eq!(tri_add(Uncertain, One), One);
        assert_eq!(tri_add(Zero, Uncertain), Zero);
        assert_eq!(tri_add(Uncertain, Uncertain), Uncertain);
        // SV2 = TriAdd(TriAdd(ST2, ST1), ST0)
        for a in [Zero, One, Uncertain] {
            for b in [Zero, One, Uncertain] {
                for c in [Zero, One] {
                    assert_eq!(tri_fold([a, b, c]), tri_add(tri_add(a, b), c));
                }
            }
        }
    }

    #[test]
    fn carry_cascade_values() {
        assert_eq!(sv(&q("555+448"), 2), 1);
        for k in 0..3 {
            assert_eq!(sv(&q("111+111"), k), 0);
        }
        assert_eq!(sv(&q("199+801"), 2), carry_out(199, 801, 2));
        assert_eq!(carry_out(199, 801, 2), 1);
    }

    #[test]
    fn addition_examples() {
        assert_eq!(
            add_via_cascade(&q("555555555+444444448")).to_string(),
            "+1000000003"
        );
        assert_eq!(add_via_cascade(&q("00000+00000")).to_string(), "+000000");
        assert_eq!(add_via_cascade(&q("54321+45679")).to_string(), "+100000");
        assert_eq!(add_via_cascade(&q("555+448")).to_string(), "+1003");
    }

    #[test]
    fn difference_and_borrow() {
        assert_eq!(diff_mod10(d(3), d(7)), d(6));
        assert_eq!(diff_mod10(d(5), d(5)), d(0));
        assert_eq!(diff_mod10(d(0), d(1)), d(9));
        assert_eq!(tricase_borrow(d(5), d(7), 1), TriState::One);
        assert_eq!(tricase_borrow(d(5), d(5), 1), TriState::Uncertain);
        assert_eq!(tricase_borrow(d(5), d(5), 0), TriState::Zero);
        assert_eq!(tricase_borrow(d(7), d(5), 0), TriState::Zero);
    }

    #[test]
    fn borrow_cascade_values() {
        assert_eq!(mv(&q("325-129"), 1, false), borrow_out(325, 129, 1));
        assert_eq!(borrow_out(325, 129, 1), 1);
        for k in 0..3 {
            assert_eq!(mv(&q("555-111"), k, false), 0);
        }
        assert_eq!(mv(&q("325-329"), 2, false), 1);
    }

    #[test]
    fn subtraction_examples() {
        assert_eq!(sub_via_cascade(&q("325-129")).to_string(), "+0196");
        assert_eq!(sub_via_cascade(&q("325-329")).to_string(), "-0004");
        assert_eq!(sub_via_cascade(&q("777-777")).to_string(), "+0000");
    }

    #[test]
    fn overrides_change_the_expected_answer() {
        // 123+456: overriding ST1 to One injects a carry into digit 2.
        let base = q("123+456");
        let mut ov = Overrides::default();
        ov.st.insert(1, TriState::One);
        assert_eq!(answer_with_overrides(&base, &ov).to_string(), "+0679");
        // Uncertain ST1 defers to ST0 (= 0 here).
        ov.st.insert(1, TriState::Uncertain);
        assert_eq!(answer_with_overrides(&base, &ov).to_string(), "+0579");
        // Forcing the top borrow flips the sign branch.
        let sub = q("325-129");
        let mut ov = Overrides::default();
        ov.mb.insert(2, TriState::One);
        assert_eq!(answer_with_overrides(&sub, &ov).sign, Sign::Minus);
    }
}
