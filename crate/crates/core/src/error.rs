use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid order parameter beta = {beta}: {reason}")]
    InvalidOrder { beta: f64, reason: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precision loss in {what}: largest term / |sum| = {ratio:e}")]
    PrecisionLoss { what: String, ratio: f64 },

    #[error("{what} did not converge within {max_terms} terms")]
    NonConvergence { what: String, max_terms: usize },

    #[error(
        "tolerance {requested:e} not met: error estimate {achieved:e} after {n_evals} evaluations"
    )]
    ToleranceNotMet {
        requested: f64,
        achieved: f64,
        n_evals: usize,
    },

    #[error("constraint not satisfied: {0}")]
    Constraint(String),
}

impl Error {
    /// Numerical failures, as opposed to rejected inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PrecisionLoss { .. }
                | Error::NonConvergence { .. }
                | Error::ToleranceNotMet { .. }
        )
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
