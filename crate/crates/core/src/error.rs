use thiserror::Error;

/// Errors produced by the library. Numeric payloads are reported as `f64`
/// regardless of the scalar type the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violates a structural invariant (negative weight, bad grid, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// Argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operation not defined for this input family.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Quadrature did not reach the requested tolerance.
    #[error("numeric failure in {context}: best estimate {estimate:e} with error {error:e}")]
    NumericFailure {
        context: String,
        estimate: f64,
        error: f64,
    },

    /// A scaling sweep failed part-way; carries the points computed so far.
    #[error("scaling sweep failed at lambda = {lambda:e} after {} points: {source}", .completed.len())]
    SweepFailed {
        lambda: f64,
        completed: Vec<(f64, f64)>,
        source: Box<Error>,
    },

    /// A scaling report whose fit is too poor to support a verdict.
    #[error("inconclusive scaling fit (residual {residual:e} above threshold {threshold:e})")]
    Inconclusive { residual: f64, threshold: f64 },

    /// An R-extrapolation did not stabilise.
    #[error("extrapolation did not converge in {context}; sequence {values:?}")]
    NotConverged { context: String, values: Vec<f64> },

    /// The free-field check refuses a vanishing field-strength constant.
    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by invalid inputs rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Refused(_)
        )
    }
}
