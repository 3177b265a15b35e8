use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while loading or checking a reactor description.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("reference error: unknown {kind} '{id}'")]
    Reference { kind: &'static str, id: String },
    #[error("physics error: {0}")]
    Physics(String),
}

/// Errors raised by the flow model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("pressure must be positive, got {0} Pa")]
    NonPositivePressure(f64),
    #[error("no equilibrium pressure in [{p_min}, inf) for flow {flow} sccm")]
    NoRoot { flow: f64, p_min: f64 },
    #[error("Antoine denominator C + T is not positive ({0})")]
    SingularAntoine(f64),
}

/// Recipe parse errors; line and column are 1-based.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecipeError {
    #[error("line {line}, column {column}: unknown action '{found}' (expected M, V or T)")]
    UnknownAction {
        line: usize,
        column: usize,
        found: String,
    },
    #[error("line {line}, column {column}: '{found}' is not a valid {expected}")]
    NotNumeric {
        line: usize,
        column: usize,
        found: String,
        expected: &'static str,
    },
    #[error("line {line}, column {column}: cycle count must be positive, got {found}")]
    NonPositiveCycles {
        line: usize,
        column: usize,
        found: String,
    },
    #[error("line {line}, column {column}: expected 4 or 5 fields, found {found}")]
    Arity {
        line: usize,
        column: usize,
        found: usize,
    },
    #[error("line {line}, column 1: first recipe line must carry a cycle count")]
    MissingFirstCycles { line: usize },
    #[error("line {line}, column {column}: {message}")]
    InvalidValue {
        line: usize,
        column: usize,
        message: String,
    },
}

impl RecipeError {
    pub fn line(&self) -> usize {
        match self {
            RecipeError::UnknownAction { line, .. }
            | RecipeError::NotNumeric { line, .. }
            | RecipeError::NonPositiveCycles { line, .. }
            | RecipeError::Arity { line, .. }
            | RecipeError::MissingFirstCycles { line }
            | RecipeError::InvalidValue { line, .. } => *line,
        }
    }

    pub fn column(&self) -> usize {
        match self {
            RecipeError::UnknownAction { column, .. }
            | RecipeError::NotNumeric { column, .. }
            | RecipeError::NonPositiveCycles { column, .. }
            | RecipeError::Arity { column, .. }
            | RecipeError::InvalidValue { column, .. } => *column,
            RecipeError::MissingFirstCycles { .. } => 1,
        }
    }
}

/// Errors from the time integrator.
#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum SolverError {
    #[error("numerical instability at t = {time:.4} s: {detail}")]
    Unstable { time: f64, detail: String },
    #[error("recipe refused: {0}")]
    Refused(String),
}
