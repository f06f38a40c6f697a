//! Questions, answers and their token layout.
//!
//! A question over `n` digits occupies `2n + 2` tokens (`D`, operator, `D'`,
//! `=`) and the answer another `n + 2` (sign plus `n + 1` digits), for a
//! total sequence length of `3n + 4`. Operands are always zero padded.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ArithError, Result};
use crate::vocab::{self, TokenId, EQUALS, MINUS, PLUS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digit(u8);

impl Digit {
    pub const ZERO: Digit = Digit(0);

    pub fn new(value: u32) -> Result<Self> {
        if value > 9 {
            return Err(ArithError::DigitOutOfRange(value));
        }
        Ok(Digit(value as u8))
    }

    /// Reduces any integer modulo 10.
    pub fn wrapping(value: i64) -> Self {
        Digit(value.rem_euclid(10) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn token(self) -> TokenId {
        self.0 as TokenId
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A zero-padded operand, stored most-significant digit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Operand {
    digits: Vec<Digit>,
}

impl Operand {
    pub fn from_digits(digits: Vec<Digit>) -> Result<Self> {
        if digits.is_empty() {
            return Err(ArithError::ZeroDigits);
        }
        Ok(Operand { digits })
    }

    /// Zero-pads `value` to `n_digits`. Fails if it does not fit.
    pub fn from_u64(value: u64, n_digits: usize) -> Result<Self> {
        if n_digits == 0 {
            return Err(ArithError::ZeroDigits);
        }
        let text = value.to_string();
        if text.len() > n_digits {
            return Err(ArithError::LengthMismatch {
                expected: n_digits,
                found: text.len(),
            });
        }
        Self::parse_padded(&format!("{:0>width$}", text, width = n_digits))
    }

    fn parse_padded(text: &str) -> Result<Self> {
        let digits = text
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|v| Digit(v as u8))
                    .ok_or(ArithError::UnknownSymbol(c))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_digits(digits)
    }

    pub fn n_digits(&self) -> usize {
        self.digits.len()
    }

    /// Digits most-significant first.
    pub fn digits(&self) -> &[Digit] {
        &self.digits
    }

    /// `D_k`: the digit of place value `10^k` (k = 0 is the units digit).
    pub fn digit(&self, k: usize) -> Digit {
        self.digits[self.digits.len() - 1 - k]
    }

    pub fn set_digit(&mut self, k: usize, digit: Digit) {
        let idx = self.digits.len() - 1 - k;
        self.digits[idx] = digit;
    }

    pub fn to_u128(&self) -> Option<u128> {
        self.digits.iter().try_fold(0u128, |acc, d| {
            acc.checked_mul(10)?.checked_add(d.value() as u128)
        })
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
}

impl Op {
    pub fn token(self) -> TokenId {
        match self {
            Op::Add => PLUS,
            Op::Sub => MINUS,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Question {
    pub op: Op,
    pub d: Operand,
    pub d_prime: Operand,
}

impl Question {
    pub fn new(op: Op, d: Operand, d_prime: Operand) -> Result<Self> {
        if d.n_digits() != d_prime.n_digits() {
            return Err(ArithError::LengthMismatch {
                expected: d.n_digits(),
                found: d_prime.n_digits(),
            });
        }
        Ok(Question { op, d, d_prime })
    }

    pub fn from_u64(op: Op, d: u64, d_prime: u64, n_digits: usize) -> Result<Self> {
        Self::new(
            op,
            Operand::from_u64(d, n_digits)?,
            Operand::from_u64(d_prime, n_digits)?,
        )
    }

    pub fn n_digits(&self) -> usize {
        self.d.n_digits()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.n_digits())
    }

    /// Token ids for `D op D' =`, length `2n + 2`.
    pub fn encode(&self) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(2 * self.n_digits() + 2);
        out.extend(self.d.digits().iter().map(|d| d.token()));
        out.push(self.op.token());
        out.extend(self.d_prime.digits().iter().map(|d| d.token()));
        out.push(EQUALS);
        out
    }

    /// Parses `"325-129"` or `"325-129="`. When `n_digits` is `None` the
    /// width of the longer operand is used; shorter operands are zero padded.
    pub fn parse(text: &str, n_digits: Option<usize>) -> Result<Self> {
        let bad = |reason: &str| ArithError::Parse {
            input: text.to_string(),
            reason: reason.to_string(),
        };
        let body = text.trim().trim_end_matches('=');
        let (idx, op) = body
            .char_indices()
            .skip(1)
            .find_map(|(i, c)| match c {
                '+' => Some((i, Op::Add)),
                '-' => Some((i, Op::Sub)),
                _ => None,
            })
            .ok_or_else(|| bad("missing + or - operator"))?;
        let (lhs, rhs) = (&body[..idx], &body[idx + 1..]);
        if lhs.is_empty() || rhs.is_empty() {
            return Err(bad("empty operand"));
        }
        if !lhs.chars().chain(rhs.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad("operands must be decimal digits"));
        }
        let width = n_digits.unwrap_or(lhs.len().max(rhs.len()));
        if lhs.len() > width || rhs.len() > width {
            return Err(bad("operand wider than n_digits"));
        }
        let pad = |s: &str| Operand::parse_padded(&format!("{s:0>width$}"));
        Question::new(op, pad(lhs)?, pad(rhs)?)
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.d, self.op.symbol(), self.d_prime)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn token(self) -> TokenId {
        match self {
            Sign::Plus => PLUS,
            Sign::Minus => MINUS,
        }
    }
}

/// A signed answer with `n + 1` digits, most-significant first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Answer {
    pub sign: Sign,
    pub digits: Vec<Digit>,
}

impl Answer {
    /// `A_k`, k = 0 being the units digit.
    pub fn digit(&self, k: usize) -> Digit {
        self.digits[self.digits.len() - 1 - k]
    }

    /// Sign token followed by the digit tokens, length `n + 2`.
    pub fn encode(&self) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(self.digits.len() + 1);
        out.push(self.sign.token());
        out.extend(self.digits.iter().map(|d| d.token()));
        out
    }

    pub fn decode(tokens: &[TokenId], n_digits: usize) -> Result<Self> {
        if tokens.len() != n_digits + 2 {
            return Err(ArithError::MalformedAnswer(format!(
                "expected {} tokens, got {}",
                n_digits + 2,
                tokens.len()
            )));
        }
        let sign = match tokens[0] {
            PLUS => Sign::Plus,
            MINUS => Sign::Minus,
            other => {
                return Err(ArithError::MalformedAnswer(format!(
                    "first token {other} is not a sign"
                )))
            }
        };
        let digits = tokens[1..]
            .iter()
            .map(|&t| {
                if vocab::is_digit(t) {
                    Ok(Digit(t as u8))
                } else {
                    Err(ArithError::MalformedAnswer(format!(
                        "non-digit token {t} after the sign"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Answer { sign, digits })
    }

    pub fn is_zero(&self) -> bool {
        self.digits.iter().all(|d| d.value() == 0)
    }

    /// Parses `"+1003"` or `"-0004"`.
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = vocab::tokenize(text.trim())?;
        if tokens.len() < 2 {
            return Err(ArithError::MalformedAnswer(text.to_string()));
        }
        Self::decode(&tokens, tokens.len() - 2)
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.sign {
            Sign::Plus => '+',
            Sign::Minus => '-',
        };
        write!(f, "{sign}")?;
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Full token sequence `question answer`, length `3n + 4`.
pub fn encode_example(q: &Question, a: &Answer) -> Vec<TokenId> {
    let mut tokens = q.encode();
    tokens.extend(a.encode());
    tokens
}

/// Canonical text form `00555+00448=+001003`.
pub fn canonical_line(q: &Question, a: &Answer) -> String {
    format!("{q}={a}")
}

pub fn parse_canonical_line(line: &str) -> Result<(Question, Answer)> {
    let (lhs, rhs) = line
        .trim()
        .split_once('=')
        .ok_or_else(|| ArithError::Parse {
            input: line.to_string(),
            reason: "missing '='".to_string(),
        })?;
    let q = Question::parse(lhs, None)?;
    let a = Answer::parse(rhs)?;
    if a.digits.len() != q.n_digits() + 1 {
        return Err(ArithError::MalformedAnswer(format!(
            "answer has {} digits, expected {}",
            a.digits.len(),
            q.n_digits() + 1
        )));
    }
    Ok((q, a))
}

/// The role a token position plays in the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    D(usize),
    Operator,
    DPrime(usize),
    Equals,
    Sign,
    A(usize),
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::D(k) => write!(f, "D{k}"),
            Role::Operator => write!(f, "OP"),
            Role::DPrime(k) => write!(f, "D'{k}"),
            Role::Equals => write!(f, "="),
            Role::Sign => write!(f, "SIGN"),
            Role::A(k) => write!(f, "A{k}"),
        }
    }
}

/// Position map for an `n`-digit question:
/// `P0..P(n-1)` = `D_{n-1}..D_0`, `Pn` = operator, `P(n+1)..P(2n)` =
/// `D'_{n-1}..D'_0`, `P(2n+1)` = `=`, `P(2n+2)` = answer sign,
/// `P(2n+3)..P(3n+3)` = `A_n..A_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub n_digits: usize,
}

impl Layout {
    pub fn new(n_digits: usize) -> Self {
        Layout { n_digits }
    }

    pub fn seq_len(&self) -> usize {
        3 * self.n_digits + 4
    }

    pub fn question_len(&self) -> usize {
        2 * self.n_digits + 2
    }

    pub fn answer_len(&self) -> usize {
        self.n_digits + 2
    }

    pub fn role(&self, position: usize) -> Option<Role> {
        let n = self.n_digits;
        let role = match position {
            p if p < n => Role::D(n - 1 - p),
            p if p == n => Role::Operator,
            p if p <= 2 * n => Role::DPrime(2 * n - p),
            p if p == 2 * n + 1 => Role::Equals,
            p if p == 2 * n + 2 => Role::Sign,
            p if p <= 3 * n + 3 => Role::A(3 * n + 3 - p),
            _ => return None,
        };
        Some(role)
    }

    pub fn position(&self, role: Role) -> usize {
        let n = self.n_digits;
        match role {
            Role::D(k) => n - 1 - k,
            Role::Operator => n,
            Role::DPrime(k) => 2 * n - k,
            Role::Equals => 2 * n + 1,
            Role::Sign => 2 * n + 2,
            Role::A(k) => 3 * n + 3 - k,
        }
    }

    /// Position whose logits predict the token at `role`.
    pub fn predicting_position(&self, role: Role) -> usize {
        self.position(role) - 1
    }

    /// The answer token predicted by the logits at `position`, if any.
    pub fn predicted_role(&self, position: usize) -> Option<Role> {
        if position + 1 >= self.question_len() {
            self.role(position + 1)
        } else {
            None
        }
    }

    /// Positions whose logits are scored by the loss, one per answer token.
    pub fn loss_positions(&self) -> std::ops::Range<usize> {
        self.question_len() - 1..self.seq_len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_question_examples() {
        let q = Question::parse("325-129", None).unwrap();
        assert_eq!(vocab::render(&q.encode()).unwrap(), "325-129=");
        let q = Question::from_u64(Op::Add, 0, 0, 3).unwrap();
        assert_eq!(vocab::render(&q.encode()).unwrap(), "000+000=");
        let q = Question::parse("54321+45679", Some(5)).unwrap();
        assert_eq!(vocab::render(&q.encode()).unwrap(), "54321+45679=");
        assert_eq!(q.encode().len(), 12);
    }

    #[test]
    fn decode_answer_examples() {
        let a = Answer::decode(&vocab::tokenize("+1003").unwrap(), 3).unwrap();
        assert_eq!(a.sign, Sign::Plus);
        assert_eq!(
            a.digits.iter().map(|d| d.value()).collect::<Vec<_>>(),
            [1, 0, 0, 3]
        );
        let a = Answer::decode(&vocab::tokenize("-0004").unwrap(), 3).unwrap();
        assert_eq!(a.sign, Sign::Minus);
        assert_eq!(a.to_string(), "-0004");
        let a = Answer::decode(&vocab::tokenize("+0000").unwrap(), 3).unwrap();
        assert!(a.is_zero());
        assert_eq!(a.sign, Sign::Plus);
    }

    #[test]
    fn decode_rejects_malformed() {
        assert!(Answer::decode(&vocab::tokenize("+10=3").unwrap(), 3).is_err());
        assert!(Answer::decode(&vocab::tokenize("11003").unwrap(), 3).is_err());
        assert!(Answer::decode(&vocab::tokenize("+103").unwrap(), 3).is_err());
    }

    #[test]
    fn digit_bounds() {
        assert!(Digit::new(9).is_ok());
        assert_eq!(Digit::new(10), Err(ArithError::DigitOutOfRange(10)));
        assert_eq!(Digit::wrapping(-4).value(), 6);
    }

    #[test]
    fn operand_indexing_is_place_value() {
        let op = Operand::from_u64(325, 3).unwrap();
        assert_eq!(op.digit(0).value(), 5);
        assert_eq!(op.digit(2).value(), 3);
        assert!(Operand::from_u64(1000, 3).is_err());
    }

    #[test]
    fn layout_positions_for_five_digits() {
        let l = Layout::new(5);
        assert_eq!(l.seq_len(), 19);
        assert_eq!(l.role(0), Some(Role::D(4)));
        assert_eq!(l.role(5), Some(Role::Operator));
        assert_eq!(l.role(6), Some(Role::DPrime(4)));
        assert_eq!(l.role(10), Some(Role::DPrime(0)));
        assert_eq!(l.role(11), Some(Role::Equals));
        assert_eq!(l.role(12), Some(Role::Sign));
        assert_eq!(l.role(13), Some(Role::A(5)));
        assert_eq!(l.role(18), Some(Role::A(0)));
        assert_eq!(l.role(19), None);
        for p in 0..l.seq_len() {
            assert_eq!(l.position(l.role(p).unwrap()), p);
        }
        assert_eq!(l.predicting_position(Role::A(5)), 12);
        assert_eq!(l.predicted_role(17), Some(Role::A(0)));
        assert_eq!(l.predicted_role(10), None);
        assert_eq!(l.loss_positions(), 11..18);
    }

    #[test]
    fn canonical_line_round_trip() {
        let (q, a) = parse_canonical_line("00555+00448=+001003").unwrap();
        assert_eq!(q.n_digits(), 5);
        assert_eq!(canonical_line(&q, &a), "00555+00448=+001003");
        assert!(parse_canonical_line("555+448=+03").is_err());
    }

    #[test]
    fn parse_pads_short_operands() {
        let q = Question::parse("11111+89", None).unwrap();
        assert_eq!(q.to_string(), "11111+00089");
        assert!(Question::parse("12+", None).is_err());
        assert!(Question::parse("1a+2", None).is_err());
    }
}
