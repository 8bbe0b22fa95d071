use thiserror::Error;

use crate::model::MeanFieldState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter or argument violates a documented invariant.
    #[error("invalid {field}: {reason}")]
    Domain { field: &'static str, reason: String },

    #[error("state has {got} sites but parameters describe {expected}")]
    Shape { expected: usize, got: usize },

    /// Some photonic mode frequency is not positive, so there is no stable normal phase.
    #[error("mode frequency {min_frequency} at k={mode} is not positive; normal phase is dynamically unstable")]
    UnstableWindow { mode: usize, min_frequency: f64 },

    #[error("operation requires {required} boundary conditions")]
    Boundary { required: &'static str },

    #[error("step size underflow at t={time} (h={step})")]
    StepFailure {
        time: f64,
        step: f64,
        last_good: Box<MeanFieldState>,
    },

    #[error(
        "newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },

    #[error("singular newton jacobian (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },

    #[error("eigenvalue solver did not converge on a {dim}x{dim} matrix")]
    EigenSolver { dim: usize },

    #[error("expected {expected} structural zero modes, found {found}")]
    ZeroModeMismatch { expected: usize, found: usize },

    #[error("bisection failed: {0}")]
    BisectionFailure(String),
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical method (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepFailure { .. }
                | Error::NotConverged { .. }
                | Error::SingularJacobian { .. }
                | Error::EigenSolver { .. }
                | Error::ZeroModeMismatch { .. }
                | Error::BisectionFailure(_)
        )
    }
}
