use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

pub const MANIFEST_VERSION: u32 = 1;

/// Sidecar written next to every output file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub navbench_version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub config: Value,
    pub seeds: Value,
    pub inputs: Value,
    pub outputs: Vec<PathBuf>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` wins when set.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seeds: Value, inputs: Value, outputs: Vec<PathBuf>) -> Self {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            navbench_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            argv: std::env::args().collect(),
            config,
            seeds,
            inputs,
            outputs,
            timestamp: timestamp(),
        }
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        output.with_file_name(name)
    }

    pub fn write_for(&self, output: &Path) -> navbench::Result<PathBuf> {
        let path = Self::path_for(output);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}
