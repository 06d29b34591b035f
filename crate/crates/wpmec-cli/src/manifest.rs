//! Run manifests: one JSON document per command invocation tying every
//! output file to the exact configuration, seed and artifact version
//! that produced it.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use wpmec_core::SimConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Artifact version that produced the run.
    pub version: String,
    /// Subcommand name.
    pub command: String,
    /// Base seed of the run.
    pub seed: u64,
    /// Full configuration snapshot after validation and overrides.
    pub config: SimConfig,
    /// Unix timestamps (seconds) of run start and end.
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Wall-clock duration in seconds. Lives here rather than in any
    /// CSV so metric files stay byte-identical across reruns.
    pub wall_clock_seconds: f64,
    /// Output files written by the run, relative to the output dir.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: SimConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            started_unix: unix_now(),
            finished_unix: 0,
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self, wall_clock_seconds: f64, outputs: Vec<String>) {
        self.finished_unix = unix_now();
        self.wall_clock_seconds = wall_clock_seconds;
        self.outputs = outputs;
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, body)?;
        Ok(())
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
