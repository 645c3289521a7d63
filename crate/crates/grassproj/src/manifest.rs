use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Provenance of one run. Timestamps are Unix seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub started: u64,
    pub finished: u64,
    pub outputs: Vec<OutputFile>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64, started: u64) -> Self {
        Self {
            command: command.into(),
            config_hash,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started,
            finished: started,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) -> Result<(), CliError> {
        let data = fs::read(path)?;
        self.outputs.push(OutputFile {
            path: path.to_path_buf(),
            bytes: data.len() as u64,
            sha256: hex(&Sha256::digest(&data)),
        });
        Ok(())
    }

    /// Stamps the finish time and writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> Result<Self, CliError> {
        self.finished = unix_now();
        crate::formats::write_json(path, &self)?;
        Ok(self)
    }
}
