//! Experiment orchestration: configuration, closed loop, baseline, metrics,
//! logging and sweeps.

pub mod baseline;
pub mod config;
pub mod experiment;
pub mod log;
pub mod metrics;
pub mod sweep;

pub use config::{ControllerKind, ExperimentConfig};
pub use experiment::{run_experiment, RunSummary, TargetRecord};
pub use sweep::{sweep, SweepAxis};
