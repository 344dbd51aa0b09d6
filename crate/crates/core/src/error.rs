//! Error type shared by the solver and surrogate modules.

use thiserror::Error;

/// Errors produced by field evaluation, solvers and the bi-fidelity core.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed inconsistent shapes, empty inputs or out-of-range arguments.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A physical constraint was violated (e.g. scattering field below its floor).
    #[error("domain error: {0}")]
    Domain(String),

    /// Time step exceeds the stability limit of the scheme.
    #[error("step size error: {0}")]
    StepSize(String),

    /// Greedy selection found no nonzero candidate.
    #[error("empty basis: all candidates are numerically zero")]
    EmptyBasis,

    /// The selected-point Gramian is singular or indefinite.
    #[error("singular Gramian: {0}")]
    SingularGramian(String),

    /// Snapshot or surrogate file could not be parsed.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
