use thiserror::Error;

use crate::kg::BetId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate triple ({triple})")]
    DuplicateTriple { line: usize, triple: String },

    #[error("gold incomplete: BET {0} has no gold label")]
    GoldIncomplete(BetId),

    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),

    #[error("invalid BET id {0}")]
    InvalidBet(BetId),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("degenerate class mass: no probability mass for class {class}")]
    DegenerateClassMass { class: u8 },

    #[error("exhausted: every BET has already been evaluated")]
    Exhausted,

    #[error("oracle limit: {n} BETs exceeds the exhaustive-search limit of {limit}")]
    OracleLimit { n: usize, limit: usize },

    #[error("budget exhausted: residual {residual} cannot pay {needed}")]
    BudgetExhausted { residual: f64, needed: f64 },

    #[error("end of input while waiting for an answer")]
    EndOfInput,

    #[error("not enough eligible BETs: need {needed}, have {available} (short by {})", needed - available)]
    InsufficientEligible { needed: usize, available: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
