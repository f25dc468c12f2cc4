use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use polarq_core::construct::worker_threads;
use serde::Serialize;

/// Provenance record written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub channel: String,
    pub version: &'static str,
    pub threads: usize,
    pub finished_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(
        command: &'static str,
        config: &impl Serialize,
        channel: String,
        started: Instant,
        outputs: Vec<PathBuf>,
    ) -> Self {
        Self {
            command,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            channel,
            version: env!("CARGO_PKG_VERSION"),
            threads: worker_threads(),
            finished_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            outputs,
        }
    }
}
