use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub experiment: &'static str,
    pub version: &'static str,
    pub config: &'a ExperimentConfig,
    pub seeds: &'a [u64],
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub created_unix: u64,
}

pub fn write_manifest(dir: &Path, config: &ExperimentConfig, seeds: &[u64], outputs: Vec<String>) -> std::io::Result<()> {
    let manifest = RunManifest {
        experiment: config.experiment.name(),
        version: env!("CARGO_PKG_VERSION"),
        config,
        seeds,
        outputs,
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), text + "\n")
}
