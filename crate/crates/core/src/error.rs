//! Error type shared by all modules.
//!
//! The variants map onto the process exit codes used by the CLI: bad input is
//! a usage error, exceeded budgets are resource errors, and a mathematical
//! identity that fails to verify is a check failure.  `Internal` marks
//! conditions that indicate a bug in this crate rather than in the input.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (bad label, mismatched ring orders,
    /// invalid tower, out-of-range argument).
    #[error("usage error: {0}")]
    Usage(String),

    /// A cyclotomic element expected to be rational had a nonzero
    /// non-constant coordinate.
    #[error("non-rational cyclotomic element: {0}")]
    Rationality(String),

    /// Requested output precision cannot be certified from the given input
    /// precision; the message names the required input size.
    #[error("insufficient precision: {0}")]
    Precision(String),

    /// An explicit computation budget (levels, subgroup count, degree) was
    /// exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// A quantity (such as a unit index) is not determined by the implemented
    /// rules and must be supplied by the caller.
    #[error("needs user input: {0}")]
    NeedsUserInput(String),

    /// A verified mathematical identity failed; this is a build-failing event
    /// when it occurs during a checked pipeline.
    #[error("identity check failed: {0}")]
    CheckFailed(String),

    /// Internal invariant violation; indicates a bug in this crate.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
