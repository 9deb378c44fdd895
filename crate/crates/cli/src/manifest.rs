//! Run manifests: every command writes one next to its primary output with
//! enough information (`argv`, seed, versions) to re-run it byte-identically
//! via `jointcast rerun --manifest <file>`.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::CliResult;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Full argument vector (without the binary name).
    pub argv: Vec<String>,
    pub seed: u64,
    /// Unix timestamp; timestamps live only here, never in output files.
    pub created_unix: u64,
    pub outputs: Vec<String>,
    pub info: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, argv: Vec<String>, seed: u64) -> Self {
        Manifest {
            tool: "jointcast".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            argv,
            seed,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: Vec::new(),
            info: serde_json::Value::Null,
        }
    }

    pub fn with_outputs(mut self, outputs: &[&str]) -> Self {
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_info(mut self, info: serde_json::Value) -> Self {
        self.info = info;
        self
    }

    pub fn write_next_to(&self, primary_output: &str) -> CliResult<PathBuf> {
        let path = PathBuf::from(format!("{primary_output}.manifest.json"));
        self.write(&path)?;
        Ok(path)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let text = serde_json::to_string_pretty(self).map_err(anyhow::Error::new)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text).map_err(anyhow::Error::new)?)
    }
}

/// Reconstruct the argv a command was invoked with, for the manifest.
pub fn current_argv() -> Vec<String> {
    std::env::args().skip(1).collect()
}
