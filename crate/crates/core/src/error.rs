use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside an objective's domain (e.g. a nonpositive price).
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("schedule violation: {0}")]
    Schedule(String),

    /// The simulation stopped at the given event because the objective rejected the new point.
    #[error("run aborted at event {event}: {reason}")]
    Aborted { event: usize, reason: String },

    /// Warehouse balance condition |kappa_j v_j| <= 1/10 failed during an ongoing-market run.
    #[error("warehouse balance breached at event {event} (good {good}): |kappa*v| = {value}")]
    BalanceBreach { event: usize, good: usize, value: f64 },

    /// A warehouse offset left `[−χ_j/2, χ_j/2]`.
    #[error("warehouse capacity exceeded at event {event} (good {good}): v = {value}")]
    CapacityBreach { event: usize, good: usize, value: f64 },

    #[error("trace error: {0}")]
    Trace(String),

    #[error("replay mismatch at row {row}: {reason}")]
    Replay { row: usize, reason: String },

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), reason: reason.into() }
    }
}
