//! Experiment runner for the cooperative search library: configuration files,
//! parallel runs, metric tables and comparisons.

pub mod config;
pub mod error;
pub mod metrics;
pub mod report;
pub mod run;

pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use report::Comparison;
pub use run::{run_experiment, RunOptions};
