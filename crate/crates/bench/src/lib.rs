//! Experiment driver for the pricing estimators: configuration, seeded
//! replication sweeps, result CSVs, and the command-line interface.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod results;

pub use config::{ExperimentConfig, Preset};
pub use error::{BenchError, Result};
