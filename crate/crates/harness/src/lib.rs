//! Seeded experiment runner for the SIM-enhanced cell-free uplink model:
//! sweep specs, per-drop evaluation, aggregation and CSV emission, plus
//! the oracle checks behind `simcf validate`.

pub mod canned;
pub mod error;
pub mod output;
pub mod runner;
pub mod spec;
pub mod stats;
pub mod validate;

pub use error::{HarnessError, Result};
pub use runner::{run_experiment, ExperimentOutput};
pub use spec::{ExperimentSpec, PhaseMode, PowerMode, Scheme, SweepVariable};
