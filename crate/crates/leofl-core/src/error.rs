//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent scenario configuration. The message names the
    /// offending field and the violated constraint.
    #[error("configuration error: {0}")]
    Config(String),

    /// A synchronous aggregation received updates computed against different
    /// global model versions.
    #[error("synchronization error: update from {client} has base version {got}, round expects {expected}")]
    Synchronization {
        client: String,
        expected: u64,
        got: u64,
    },

    /// Local training produced a non-finite loss or gradient.
    #[error("training diverged at local step {step}: {what}")]
    TrainingDivergence { step: usize, what: String },

    /// A model parameter became non-finite after a parameter-server apply.
    #[error("non-finite parameter after apply (event seq {event_seq})")]
    NonFiniteModel { event_seq: u64 },

    /// Two partial aggregates claim to cover the same client.
    #[error("double counting: client {client} covered by more than one partial aggregate")]
    DoubleCounting { client: String },

    /// The scheduler ran out of contact windows before the simulation horizon.
    #[error("horizon exhausted: no cluster schedulable before t = {horizon_s} s")]
    HorizonExhausted { horizon_s: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}
