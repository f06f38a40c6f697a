use std::fmt;
use std::str::FromStr;

use cascade_core::{
    diff_mod10, sa, sc, st, sv, tricase_borrow, Digit, Op, Overrides, Question, QuestionClass,
    TriState,
};
use serde::{Deserialize, Serialize};

use crate::error::{InterpError, Result};

/// Algorithmic roles a node can implement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubtaskKind {
    SA,
    SC,
    ST,
    SV,
    MD,
    MB,
    MT,
    ND,
    NB,
    OPR,
    SGN,
}

/// Shape of the value a subtask computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateType {
    /// Ten-valued digit result.
    Digit,
    /// Carry or borrow bit.
    Binary,
    /// 0, 1 or Uncertain.
    Tri,
    /// No per-question value (operator and sign detection).
    Flag,
}

impl SubtaskKind {
    pub const ALL: [SubtaskKind; 11] = [
        SubtaskKind::SA,
        SubtaskKind::SC,
        SubtaskKind::ST,
        SubtaskKind::SV,
        SubtaskKind::MD,
        SubtaskKind::MB,
        SubtaskKind::MT,
        SubtaskKind::ND,
        SubtaskKind::NB,
        SubtaskKind::OPR,
        SubtaskKind::SGN,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubtaskKind::SA => "SA",
            SubtaskKind::SC => "SC",
            SubtaskKind::ST => "ST",
            SubtaskKind::SV => "SV",
            SubtaskKind::MD => "MD",
            SubtaskKind::MB => "MB",
            SubtaskKind::MT => "MT",
            SubtaskKind::ND => "ND",
            SubtaskKind::NB => "NB",
            SubtaskKind::OPR => "OPR",
            SubtaskKind::SGN => "SGN",
        }
    }

    /// The question class whose answers depend on this subtask. Operator
    /// and sign detection serve every class and return `None`.
    pub fn class(self) -> Option<QuestionClass> {
        match self {
            SubtaskKind::SA | SubtaskKind::SC | SubtaskKind::ST | SubtaskKind::SV => {
                Some(QuestionClass::Add)
            }
            SubtaskKind::MD | SubtaskKind::MB | SubtaskKind::MT => Some(QuestionClass::SubPos),
            SubtaskKind::ND | SubtaskKind::NB => Some(QuestionClass::SubNeg),
            SubtaskKind::OPR | SubtaskKind::SGN => None,
        }
    }

    pub fn state(self) -> StateType {
        match self {
            SubtaskKind::SA | SubtaskKind::MD | SubtaskKind::ND => StateType::Digit,
            SubtaskKind::SC | SubtaskKind::SV | SubtaskKind::MB | SubtaskKind::NB => {
                StateType::Binary
            }
            SubtaskKind::ST | SubtaskKind::MT => StateType::Tri,
            SubtaskKind::OPR | SubtaskKind::SGN => StateType::Flag,
        }
    }

    pub fn per_digit(self) -> bool {
        self.state() != StateType::Flag
    }

    /// Number of distinct values, used for balanced probe construction.
    pub fn n_values(self) -> usize {
        match self.state() {
            StateType::Digit => 10,
            StateType::Binary => 2,
            StateType::Tri => 3,
            StateType::Flag => 0,
        }
    }

    fn pair(self, q: &Question, k: usize) -> (Digit, Digit) {
        match self {
            SubtaskKind::ND | SubtaskKind::NB => (q.d_prime.digit(k), q.d.digit(k)),
            _ => (q.d.digit(k), q.d_prime.digit(k)),
        }
    }

    fn tri_case(self, q: &Question, k: usize) -> TriState {
        let (a, b) = self.pair(q, k);
        match self.class() {
            Some(QuestionClass::Add) => st(a, b, k),
            _ => tricase_borrow(a, b, k),
        }
    }

    /// The value this subtask takes for digit `k` of `q`, as a class label.
    /// Binary kinds are undefined when the pair's tri-case is Uncertain,
    /// except SV which is always resolved.
    pub fn label(self, q: &Question, k: usize) -> Option<usize> {
        let (a, b) = self.pair(q, k);
        match self {
            SubtaskKind::SA => Some(sa(a, b).value() as usize),
            SubtaskKind::MD | SubtaskKind::ND => Some(diff_mod10(a, b).value() as usize),
            SubtaskKind::ST | SubtaskKind::MT => Some(self.tri_case(q, k).label()),
            SubtaskKind::SC => self.tri_case(q, k).bit().map(|_| sc(a, b) as usize),
            SubtaskKind::MB | SubtaskKind::NB => self.tri_case(q, k).bit().map(usize::from),
            SubtaskKind::SV => Some(sv(q, k) as usize),
            SubtaskKind::OPR | SubtaskKind::SGN => None,
        }
    }

    /// Label used when the same node is also scored under the tri-state
    /// partition of its digit pair (reporting both fits for binary kinds).
    pub fn tri_label(self, q: &Question, k: usize) -> usize {
        self.tri_case(q, k).label()
    }

    /// The other subtask computed from the same digit pair, held fixed
    /// across interchange pairs so only the targeted value changes: the
    /// carry (borrow) case for the digit kinds and the digit result for the
    /// carry (borrow) kinds.
    fn companion(self, q: &Question, k: usize) -> Option<usize> {
        let (a, b) = self.pair(q, k);
        match (self.state(), self.class()) {
            (StateType::Digit, _) => Some(self.tri_case(q, k).label()),
            (StateType::Tri | StateType::Binary, _) if self == SubtaskKind::SV => None,
            (StateType::Tri | StateType::Binary, Some(QuestionClass::Add)) => {
                Some(sa(a, b).value() as usize)
            }
            (StateType::Tri | StateType::Binary, _) => Some(diff_mod10(a, b).value() as usize),
            _ => None,
        }
    }

    /// Digits a donor may differ from its base in.
    fn free_digits(self, k: usize) -> std::ops::RangeInclusive<usize> {
        match self {
            SubtaskKind::SV => 0..=k,
            _ => k..=k,
        }
    }

    pub fn accepts_op(self, op: Op) -> bool {
        match self.class() {
            Some(QuestionClass::Add) => op == Op::Add,
            Some(_) => op == Op::Sub,
            None => true,
        }
    }

    /// Substitutions that re-run the cascade with the donor's value for
    /// this subtask.
    pub fn overrides(self, donor: &Question, k: usize) -> Overrides {
        let mut ov = Overrides::default();
        let Some(label) = self.label(donor, k) else {
            return ov;
        };
        let digit = Digit::wrapping(label as i64);
        match self {
            SubtaskKind::SA => {
                ov.sa.insert(k, digit);
            }
            SubtaskKind::MD => {
                ov.md.insert(k, digit);
            }
            SubtaskKind::ND => {
                ov.nd.insert(k, digit);
            }
            SubtaskKind::ST => {
                ov.st.insert(k, self.tri_case(donor, k));
            }
            SubtaskKind::SC | SubtaskKind::SV => {
                ov.st.insert(k, TriState::from_bit(label as u8));
            }
            SubtaskKind::MT => {
                ov.mb.insert(k, self.tri_case(donor, k));
            }
            SubtaskKind::MB => {
                ov.mb.insert(k, TriState::from_bit(label as u8));
            }
            SubtaskKind::NB => {
                ov.nb.insert(k, TriState::from_bit(label as u8));
            }
            SubtaskKind::OPR | SubtaskKind::SGN => {}
        }
        ov
    }

    /// Whether `(base, donor)` is a valid interchange pair for digit `k`:
    /// same operator and class, identical outside the subtask's input
    /// digits, equal companion value, and a defined value on both sides
    /// that differs unless the two questions are identical.
    pub fn check_pair(self, k: usize, base: &Question, donor: &Question) -> Result<()> {
        match self.pair_problem(k, base, donor) {
            None => Ok(()),
            Some(why) => Err(InterpError::BadPair(format!(
                "{}{k}: {base} / {donor}: {why}",
                self.name()
            ))),
        }
    }

    /// The reason `(base, donor)` is not a valid pair, if any.
    pub(crate) fn pair_problem(
        self,
        k: usize,
        base: &Question,
        donor: &Question,
    ) -> Option<&'static str> {
        if !self.per_digit() {
            return Some("subtask has no per-question value");
        }
        if base.n_digits() != donor.n_digits() || k >= base.n_digits() {
            return Some("digit index out of range");
        }
        if !self.accepts_op(base.op) || base.op != donor.op {
            return Some("operator mismatch");
        }
        if base == donor {
            return None;
        }
        let free = self.free_digits(k);
        for i in 0..base.n_digits() {
            if !free.contains(&i)
                && (base.d.digit(i) != donor.d.digit(i)
                    || base.d_prime.digit(i) != donor.d_prime.digit(i))
            {
                return Some("questions differ outside the subtask's digits");
            }
        }
        if QuestionClass::of(base) != QuestionClass::of(donor) {
            return Some("question class differs");
        }
        if self.companion(base, k) != self.companion(donor, k) {
            return Some("companion subtask value differs");
        }
        match (self.label(base, k), self.label(donor, k)) {
            (Some(a), Some(b)) if a != b => None,
            (Some(_), Some(_)) => Some("subtask value is equal"),
            _ => Some("subtask value undefined"),
        }
    }
}

impl fmt::Display for SubtaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubtaskKind {
    type Err = InterpError;

    fn from_str(s: &str) -> Result<Self> {
        SubtaskKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| InterpError::Schema(format!("unknown subtask kind {s}")))
    }
}

/// A subtask instance, e.g. `ST2`. Operator and sign detection have no digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subtask {
    pub kind: SubtaskKind,
    pub digit: Option<usize>,
}

impl Subtask {
    pub fn new(kind: SubtaskKind, digit: Option<usize>) -> Self {
        Subtask { kind, digit }
    }
}

impl fmt::Display for Subtask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.digit {
            Some(k) => write!(f, "{}{k}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}
