use std::str::FromStr;

use num_bigint::BigInt;

/// First maximal run of digits in `text`, with an optional sign directly in
/// front and thousands separators (`,` followed by three digits) removed.
/// `None` when the text holds no digit.
pub fn parse_response(text: &str) -> Option<BigInt> {
    let b = text.as_bytes();
    let start = b.iter().position(u8::is_ascii_digit)?;
    let negative = start > 0 && b[start - 1] == b'-';
    let mut digits = String::new();
    let mut i = start;
    loop {
        while i < b.len() && b[i].is_ascii_digit() {
            digits.push(b[i] as char);
            i += 1;
        }
        let group = i + 4 <= b.len()
            && b[i] == b','
            && b[i + 1..i + 4].iter().all(u8::is_ascii_digit)
            && b.get(i + 4).is_none_or(|c| !c.is_ascii_digit());
        if !group {
            break;
        }
        i += 1;
    }
    let value = BigInt::from_str(&digits).ok()?;
    Some(if negative { -value } else { value })
}
