//! Error types shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ToolkitError {
    /// Malformed input document; carries the offending key.
    #[error("parse error at key `{key}`: {message}")]
    Parse { key: String, message: String },

    /// A type invariant was violated at construction time.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// An argument is outside an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// The Wolff potential of the data diverges; the measure admits no entire solution.
    #[error("measure fails the finiteness condition: {0}")]
    Infinite(String),

    /// An iterative scheme failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// An iterative scheme diverged (sup norm exceeded the blow-up guard).
    #[error("divergence: {0}")]
    Divergence(String),

    /// A contraction-rate bound asserted by the experiment was violated.
    #[error("contraction bound violated: {0}")]
    ContractionBound(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ToolkitError>;

impl ToolkitError {
    /// Process exit status for the CLI: 2 for validation problems, 3 for numerical ones.
    pub fn exit_status(&self) -> i32 {
        match self {
            ToolkitError::Parse { .. }
            | ToolkitError::Invariant(_)
            | ToolkitError::Domain(_)
            | ToolkitError::Io(_) => 2,
            ToolkitError::Infinite(_)
            | ToolkitError::NoConvergence(_)
            | ToolkitError::Divergence(_)
            | ToolkitError::ContractionBound(_) => 3,
        }
    }
}
