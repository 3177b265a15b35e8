use serde::{Deserialize, Serialize};

use alp_core::{Narrative, TraceBundle, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub config_id: String,
    /// Reactor seconds the session may spend.
    pub budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentStatus {
    Completed,
    /// The integrator gave up part way; the trace is partial.
    Failed,
}

/// Everything kept about one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: u64,
    pub session: String,
    pub config_id: String,
    /// Recipe exactly as submitted.
    pub recipe: String,
    pub status: ExperimentStatus,
    pub failure: Option<String>,
    /// Reactor seconds charged to the budget.
    pub duration: f64,
    pub used_after: f64,
    pub remaining_after: f64,
    pub report: ValidationReport,
    pub narrative: Narrative,
    pub trace: TraceBundle,
}

/// What the caller sees after submitting a recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactResponse {
    pub experiment_id: u64,
    pub status: ExperimentStatus,
    pub duration: f64,
    pub used: f64,
    pub remaining: f64,
    pub narrative: String,
}

impl ExperimentRecord {
    pub fn compact(&self) -> CompactResponse {
        CompactResponse {
            experiment_id: self.id,
            status: self.status,
            duration: self.duration,
            used: self.used_after,
            remaining: self.remaining_after,
            narrative: self.narrative.text(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBudget {
    pub total: f64,
    pub used: f64,
}

impl TimeBudget {
    pub fn new(total: f64) -> TimeBudget {
        TimeBudget { total, used: 0.0 }
    }

    pub fn remaining(&self) -> f64 {
        self.total - self.used
    }

    pub fn allows(&self, duration: f64) -> bool {
        duration <= self.remaining() + 1e-9
    }

    pub fn charge(&mut self, duration: f64) {
        self.used += duration;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub total: f64,
    pub used: f64,
    pub remaining: f64,
    pub experiments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub config_id: String,
    pub budget: BudgetReport,
    pub experiment_ids: Vec<u64>,
}

/// Dry-run result for a recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeCheck {
    pub segments: usize,
    pub duration: f64,
    pub report: ValidationReport,
}
