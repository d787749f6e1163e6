//! Configuration, experiment orchestration and artifact output.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{parse_config, Experiment, RunConfig};
pub use experiment::{run, run_sweep, RunManifest};
