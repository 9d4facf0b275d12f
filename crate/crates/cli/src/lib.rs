//! Configuration, experiment pipelines and output for the `ajch` binary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind, MeasurementMode};
pub use error::CliError;
