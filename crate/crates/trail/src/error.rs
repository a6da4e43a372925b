//! Crate-wide error type.
//!
//! Numerical preconditions that indicate programmer error (mismatched buffer
//! lengths inside a hot loop) are `assert!`ed at construction sites instead;
//! everything that can be triggered by user input — malformed files, invalid
//! configs, distributions that fail validation, support violations inside a
//! divergence — comes back through [`Error`].

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two arguments disagree (policy vs. MDP, vector lengths, ...).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A vector that must be a probability distribution is not one.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// KL or chi-squared divergence evaluated where the second argument has a
    /// zero that the first does not. Reported as an error, never as infinity.
    #[error("support violation: {0}")]
    SupportViolation(String),

    /// A NaN or infinity appeared where a finite number was required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An operation that needs at least one sample got none.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// A serialized dataset failed to parse; `line` is 1-based.
    #[error("data format error at line {line}: {msg}")]
    DataFormat { line: usize, msg: String },

    /// An experiment config failed validation; `field` names the offender.
    #[error("invalid config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    /// A training loop produced a non-finite loss or gradient.
    #[error("training diverged at step {step}: {msg}")]
    Diverged { step: usize, msg: String },

    /// Incompatible policy/decoder modes were combined at inference time.
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    /// An exact bound check failed. Drives exit code 3 in `verify-bound`.
    #[error("bound violated: {0}")]
    BoundViolation(String),

    /// A checkpoint file is malformed or inconsistent with its sidecar.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code mandated for this error kind: 2 for config errors,
    /// 3 for bound violations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::BoundViolation(_) => 3,
            _ => 1,
        }
    }
}
