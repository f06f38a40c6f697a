//! Fixed token vocabulary shared by every model and checkpoint.
//!
//! Ids 0-9 are the digits, followed by `+ - = * /`. The ids are part of the
//! checkpoint contract and must never be reordered.

use crate::error::{ArithError, Result};

pub type TokenId = usize;

pub const PLUS: TokenId = 10;
pub const MINUS: TokenId = 11;
pub const EQUALS: TokenId = 12;
pub const MULTIPLY: TokenId = 13;
pub const DIVIDE: TokenId = 14;
pub const VOCAB_SIZE: usize = 15;

const SYMBOLS: [char; VOCAB_SIZE] = [
    '0', '1', '2', '3', '4', '5', '6', '7', '8', '9', '+', '-', '=', '*', '/',
];

pub fn symbol_to_id(c: char) -> Result<TokenId> {
    SYMBOLS
        .iter()
        .position(|&s| s == c)
        .ok_or(ArithError::UnknownSymbol(c))
}

pub fn id_to_symbol(id: TokenId) -> Result<char> {
    SYMBOLS
        .get(id)
        .copied()
        .ok_or(ArithError::UnknownTokenId(id))
}

pub fn is_digit(id: TokenId) -> bool {
    id < 10
}

/// Renders a token sequence as text, e.g. `325-129=+196`.
pub fn render(tokens: &[TokenId]) -> Result<String> {
    tokens.iter().map(|&t| id_to_symbol(t)).collect()
}

pub fn tokenize(text: &str) -> Result<Vec<TokenId>> {
    text.chars().map(symbol_to_id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_is_a_bijection() {
        assert_eq!(SYMBOLS.len(), 15);
        for id in 0..VOCAB_SIZE {
            assert_eq!(symbol_to_id(id_to_symbol(id).unwrap()).unwrap(), id);
        }
        assert_eq!(symbol_to_id('=').unwrap(), EQUALS);
        assert_eq!(symbol_to_id('/').unwrap(), DIVIDE);
        assert!(symbol_to_id('x').is_err());
        assert!(id_to_symbol(15).is_err());
    }
}
