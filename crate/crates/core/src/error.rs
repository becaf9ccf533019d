//! Crate-wide error type.

use chrono::{DateTime, Utc};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A knob or identifier supplied by the caller is outside its valid
    /// range (unknown signal name, max_parents < 1, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// The supplied data violates a precondition (unsorted events, missing
    /// classes, negative weights, ...).
    #[error("input error: {0}")]
    Input(String),

    /// A file could not be parsed; carries the 1-based line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Dataset schema does not match what an operation was fitted on.
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    /// The event stream does not reach far enough back before the
    /// ground-truth span to fill the first signal windows.
    #[error("insufficient signal history: earliest usable prediction time is {earliest_usable}")]
    InsufficientHistory { earliest_usable: DateTime<Utc> },

    /// An operation that needs both classes saw only one.
    #[error("single-class input: {0}")]
    SingleClass(String),

    /// Posterior evidence has zero probability under the model.
    #[error("impossible evidence: zero probability under the model")]
    ImpossibleEvidence,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
