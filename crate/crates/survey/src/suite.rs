use std::path::Path;
use std::str::FromStr;

use cascade_core::{oracle_eval, Op, Question};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurveyError};

/// The addition prompts, one per digit count from 1 to 12. Each sum
/// carries through every position.
pub const DEFAULT_PROMPTS: [(&str, &str); 12] = [
    ("6+5", "11"),
    ("19+87", "106"),
    ("774+229", "1003"),
    ("6587+3416", "10003"),
    ("22605+77398", "100003"),
    ("532847+467159", "1000006"),
    ("5613709+4386294", "10000003"),
    ("72582383+27417619", "100000002"),
    ("206727644+793272359", "1000000003"),
    ("7580116456+2419883549", "10000000005"),
    ("52449010267+47550989737", "100000000004"),
    ("888522030597+111477969406", "1000000000003"),
];

pub const PROMPT_PREFIX: &str = "Answer concisely: ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyPrompt {
    pub prompt: String,
    /// Decimal integer, kept as text so long answers stay exact.
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSuite {
    /// `addition`, `subtraction` or `mixed`.
    pub operation: String,
    pub prompts: Vec<SurveyPrompt>,
}

/// A validated prompt: the question it asks and its operand width.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedPrompt {
    pub prompt: String,
    pub question: Question,
    pub expected: BigInt,
    pub digits: usize,
}

/// The arithmetic expression a prompt ends with, e.g. `774+229`.
pub fn question_of(prompt: &str) -> Result<Question> {
    let body = prompt.trim_end().trim_end_matches('=').trim_end();
    let start = body
        .char_indices()
        .rev()
        .take_while(|&(_, c)| c.is_ascii_digit() || c == '+' || c == '-')
        .last()
        .map_or(body.len(), |(i, _)| i);
    Ok(Question::parse(&body[start..], None)?)
}

pub fn answer_value(q: &Question) -> BigInt {
    BigInt::from_str(&oracle_eval(q).to_string()).expect("oracle answers are decimal")
}

impl PromptSuite {
    pub fn default_addition() -> Self {
        PromptSuite {
            operation: "addition".into(),
            prompts: DEFAULT_PROMPTS
                .iter()
                .map(|(q, a)| SurveyPrompt {
                    prompt: format!("{PROMPT_PREFIX}{q}="),
                    expected: a.to_string(),
                })
                .collect(),
        }
    }

    /// Reads a suite and revalidates it.
    pub fn load(path: &Path) -> Result<Self> {
        let suite: PromptSuite = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        suite.checked()?;
        Ok(suite)
    }

    /// Checks every expected answer against the oracle, the operation
    /// label and that digit counts strictly increase.
    pub fn checked(&self) -> Result<Vec<CheckedPrompt>> {
        let ops: &[Op] = match self.operation.as_str() {
            "addition" => &[Op::Add],
            "subtraction" => &[Op::Sub],
            "mixed" => &[Op::Add, Op::Sub],
            other => return Err(SurveyError::Suite(format!("unknown operation {other:?}"))),
        };
        if self.prompts.is_empty() {
            return Err(SurveyError::Suite("no prompts".into()));
        }
        let mut out: Vec<CheckedPrompt> = Vec::with_capacity(self.prompts.len());
        for (i, p) in self.prompts.iter().enumerate() {
            let question = question_of(&p.prompt)
                .map_err(|e| SurveyError::Suite(format!("prompt {i} {:?}: {e}", p.prompt)))?;
            if !ops.contains(&question.op) {
                return Err(SurveyError::Suite(format!(
                    "prompt {i} {:?} is not {}",
                    p.prompt, self.operation
                )));
            }
            let expected = BigInt::from_str(p.expected.trim()).map_err(|_| {
                SurveyError::Suite(format!(
                    "prompt {i}: expected {:?} is not an integer",
                    p.expected
                ))
            })?;
            let truth = answer_value(&question);
            if expected != truth {
                return Err(SurveyError::Suite(format!(
                    "prompt {i} {:?}: expected {expected} but {question} = {truth}",
                    p.prompt
                )));
            }
            let digits = question.n_digits();
            if let Some(prev) = out.last() {
                if digits <= prev.digits {
                    return Err(SurveyError::Suite(format!(
                        "prompt {i} has {digits} digits after a {}-digit prompt",
                        prev.digits
                    )));
                }
            }
            out.push(CheckedPrompt {
                prompt: p.prompt.clone(),
                question,
                expected,
                digits,
            });
        }
        Ok(out)
    }
}
