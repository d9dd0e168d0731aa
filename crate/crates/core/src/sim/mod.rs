//! Batch simulation: configuration, scenario generation, the stepping loop,
//! trajectory records, and post-hoc analyses.

pub mod analyze;
pub mod config;
pub mod driver;
pub mod record;
pub mod scenario;

pub use config::{SimulationConfig, SolverKind};
pub use driver::run_simulation;
pub use record::{SimulationOutcome, SolverRecord, StepRecord};
