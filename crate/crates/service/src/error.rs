use thiserror::Error;

use alp_core::{RecipeError, ValidationReport};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    Parse(#[from] RecipeError),
    #[error("recipe violates reactor limits: {}", .0.hard.join("; "))]
    Validation(ValidationReport),
    #[error("recipe needs {requested} s but only {remaining} s of reactor time remain")]
    BudgetExceeded { requested: f64, remaining: f64 },
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("unknown experiment {experiment} in session '{session}'")]
    UnknownExperiment { session: String, experiment: u64 },
    #[error("unknown reactor configuration '{0}'")]
    UnknownConfig(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("storage error: {0}")]
    Io(#[from] std::io::Error),
}
