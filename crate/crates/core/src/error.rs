//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid geometry is unusable (singular or orientation-reversing Jacobian).
    #[error("geometry error at {location}: {detail}")]
    Geometry { location: String, detail: String },

    /// Interpolation constraints could not be satisfied on this grid.
    #[error("grid quality: worst constraint residual {residual:.3e} exceeds {threshold:.3e} ({context})")]
    GridQuality {
        residual: f64,
        threshold: f64,
        context: String,
    },

    #[error("size mismatch in {context}: expected {expected}, got {got}")]
    SizeMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    /// A quantity that must be strictly positive is not.
    #[error("non-positive {what} at index {index}: {value}")]
    NonPositive {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Iterative procedure failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Exact solution queried at or past the shock time.
    #[error("solution is multivalued: t = {t} >= shock time {t_shock}")]
    Multivalued { t: f64, t_shock: f64 },

    /// The characteristic speed never decreases along the profile.
    #[error("no shock forms: forward speed is non-decreasing everywhere")]
    NoShock,

    #[error("time integration: maximum step count {max_steps} exceeded at t = {t}")]
    MaxStepsExceeded { max_steps: usize, t: f64 },

    /// Step size collapsed; signals stiffness or blow-up (e.g. past a shock).
    #[error("time integration: step underflow (dt = {dt:.3e}) at t = {t}")]
    StepUnderflow { dt: f64, t: f64 },
}
