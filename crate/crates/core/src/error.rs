use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("digit value {0} is outside 0..=9")]
    DigitOutOfRange(u32),
    #[error("n_digits must be at least 1")]
    ZeroDigits,
    #[error("operand has {found} digits, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(char),
    #[error("token id {0} is not in the vocabulary")]
    UnknownTokenId(usize),
    #[error("malformed answer: {0}")]
    MalformedAnswer(String),
    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("invalid enrichment config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, ArithError>;
