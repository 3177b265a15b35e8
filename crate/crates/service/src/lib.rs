//! Sessions of simulated reactor time behind an HTTP API.
//!
//! Each session owns one reactor whose state carries from experiment to
//! experiment, and a budget of reactor seconds. Every submission is stored
//! on disk so a restarted server picks up where it left off.

pub mod error;
pub mod http;
pub mod record;
pub mod service;
pub mod store;

pub use error::ServiceError;
pub use http::{router, serve, serve_on};
pub use record::{BudgetReport, CompactResponse, ExperimentRecord, ExperimentStatus, SessionInfo, TimeBudget};
pub use service::{ExperimentService, ServiceOptions, DEFAULT_BUDGET};
pub use store::Store;
