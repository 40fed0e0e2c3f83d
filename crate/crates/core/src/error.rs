use thiserror::Error;

/// Errors raised by the model, the closed-form evaluators and the integrators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The stiffness factor `X = 1 + U''(q)/(m omega^2)` is not positive, so the
    /// fractional powers of `X` in every closed form are undefined.
    #[error("stiffness X = {x} is not positive at q = {q}")]
    Domain { q: f64, x: f64 },

    /// Index, parity or order outside the supported range.
    #[error("out of range: {0}")]
    Range(String),

    /// A combination the expansion does not provide a solution for.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Invalid model parameters.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The coefficient of the fourth time derivative is below the floor, so the
    /// equation degenerates to lower order.
    #[error("leading coefficient {coefficient:e} of the fourth derivative is below {floor:e} at q = {q}")]
    SingularLeadingTerm { q: f64, coefficient: f64, floor: f64 },

    /// Numerical integration stopped before reaching the final time.
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    /// Two trajectories share no common time interval.
    #[error("trajectories do not overlap in time")]
    EmptyOverlap,
}

pub type Result<T> = std::result::Result<T, Error>;
