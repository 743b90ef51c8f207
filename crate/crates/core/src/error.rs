//! Error type shared by all solver stages.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Two grid functions cannot be combined (different step, offset, length
    /// or dimension).
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An evaluation window reaches outside the data window.
    #[error("window exceeded: need {needed}, data ends at {available}")]
    WindowExceeded { needed: f64, available: f64 },

    /// The linearization has an eigenvalue too close to the imaginary axis.
    #[error("matrix is not hyperbolic: min |Re lambda| = {min_re_abs:.3e}")]
    NotHyperbolic { min_re_abs: f64 },

    /// The supplied point is not a zero of the force.
    #[error("not a stationary point: |F(s)| = {force_norm:.3e}")]
    NotStationary { force_norm: f64 },

    /// The forcing tail cannot be pushed below the contraction threshold
    /// within the first half of the window.
    #[error("forcing tail is {tail:.3e} at t = {limit}, threshold {eps:.3e}")]
    CannotLocalize { tail: f64, eps: f64, limit: f64 },

    /// Fixed-point iteration left the contraction region or ran out of
    /// iterations.
    #[error("fixed point diverged after {iterations} iterations: {reason}")]
    Diverged { iterations: usize, reason: String },

    /// A trajectory exceeded the blow-up guard.
    #[error("trajectory exceeded blow-up guard at t = {t}")]
    BlowUp { t: f64 },

    /// A forward run did not settle near any zero of the force.
    #[error("trace not near any stationary point at the window end (distance {distance:.3e})")]
    NoConvergence { distance: f64 },

    /// Input trajectory does not solve the inverse reduced equation.
    #[error("trajectory/state pair inconsistent: equation residual {residual:.3e}")]
    InconsistentInput { residual: f64 },
}

impl Error {
    /// Short machine-readable code, stable across releases; used in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::GridMismatch(_) => "GridMismatch",
            Error::WindowExceeded { .. } => "WindowExceeded",
            Error::NotHyperbolic { .. } => "NotHyperbolic",
            Error::NotStationary { .. } => "NotStationary",
            Error::CannotLocalize { .. } => "CannotLocalize",
            Error::Diverged { .. } => "Diverged",
            Error::BlowUp { .. } => "BlowUp",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::InconsistentInput { .. } => "InconsistentInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
