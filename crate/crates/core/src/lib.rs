//! Symbolic core for n-digit addition and subtraction: token layout,
//! the tri-state cascade algorithms, an arbitrary-precision oracle,
//! complexity quanta and the enriched training-data stream.

pub mod cascade;
pub mod complexity;
pub mod datagen;
pub mod error;
pub mod oracle;
pub mod question;
pub mod vocab;

pub use cascade::{
    add_via_cascade, answer_via_cascade, answer_with_overrides, diff_mod10, mv, sa, sc, st,
    sub_via_cascade, sv, tri_add, tricase_borrow, Overrides, TriState,
};
pub use complexity::{
    classify_complexity, classify_with, simulate_carries, ComplexityMeasure, Quantum, QuestionClass,
};
pub use datagen::{gen_batch, Batch, Curriculum, EnrichmentConfig};
pub use error::{ArithError, Result};
pub use oracle::oracle_eval;
pub use question::{Answer, Digit, Layout, Op, Operand, Question, Role, Sign};
pub use vocab::{TokenId, VOCAB_SIZE};
