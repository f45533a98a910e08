use thiserror::Error;

use crate::mc::RejectionReport;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The barrier is not in the regime an operation requires
    /// (e.g. a scaling frame asked for at a non-concave point).
    #[error("regime error: {0}")]
    Regime(String),

    /// A piecewise barrier construction violated its ordering or
    /// containment requirements.
    #[error("construction error: {0}")]
    Construction(String),

    /// A caller-side precondition (e.g. stochastic dominance) failed.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A conditioning event has no admissible configuration.
    #[error("empty conditioning set: {0}")]
    EmptyConstraint(String),

    /// Rejection sampling ran out of attempts.
    #[error("rejection sampling exhausted after {} attempts ({} accepted)", .0.attempts, .0.accepts)]
    Exhausted(Box<RejectionReport>),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
