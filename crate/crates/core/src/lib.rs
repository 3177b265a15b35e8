//! Virtual atomic layer processing reactor.
//!
//! A one-dimensional tube reactor with carrier flow, bubbler-fed
//! precursors and surface chemistry, driven by tabular recipes and observed
//! through a pressure gauge and a quartz crystal microbalance. Also hosts
//! the alien-market word oracle and the session tagging used to review
//! black-box discovery runs.

pub mod config;
pub mod discovery;
pub mod error;
pub mod flow;
pub mod kinetics;
pub mod market;
pub mod recipe;
pub mod telemetry;
pub mod transport;

pub use config::{load_config, reference_config, ReactorConfig, ReferenceRun, ValidationReport};
pub use error::{ConfigError, FlowError, RecipeError, SolverError};
pub use recipe::{parse_recipe, ControlState, Recipe};
pub use telemetry::{build_narrative, Narrative};
pub use transport::{Reactor, ReactorState, RecipeRun, RunOptions, TraceBundle};
