//! Configuration, experiment runners, IDX ingestion and SVG plotting for the
//! `gfl` command-line tool.

pub mod config;
pub mod idx;
pub mod manifest;
pub mod metrics;
pub mod plot;
pub mod run;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use run::{run, Outcome, RunError};
