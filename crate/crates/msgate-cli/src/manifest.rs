//! Run manifests: what was run, on which inputs, and what it wrote.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub subcommand: String,
    /// SHA-256 of the parsed options as canonical JSON.
    pub config_sha256: String,
    pub chain_sha256: Option<String>,
    pub pulse_sha256: Option<String>,
    pub tool_version: String,
    pub jobs: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>, subcommand: &str, config: &impl Serialize, jobs: usize) -> Self {
        let canonical = serde_json::to_string(config).expect("options serialize");
        RunManifest {
            command_line,
            subcommand: subcommand.to_string(),
            config_sha256: hex::encode(Sha256::digest(canonical.as_bytes())),
            chain_sha256: None,
            pulse_sha256: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            jobs,
            wall_time_s: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Path used when `--manifest` is not given: next to the first output.
    pub fn default_path(&self) -> Option<PathBuf> {
        self.outputs.first().map(|o| PathBuf::from(format!("{o}.manifest.json")))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_text(path, &serde_json::to_string_pretty(self).expect("manifest serializes"))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}
