//! Machine-readable record of one invocation: effective configuration, input
//! and output digests, and per-image statistics. Contains nothing that varies
//! between identical runs (no timestamps or timings).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::Effective;
use crate::error::CliError;

pub const RUN_LOG_SCHEMA: &str = "pointmask.run_log.v1";

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
pub struct RunLog {
    schema: &'static str,
    version: &'static str,
    command: String,
    config: Effective,
    /// Subcommand-specific settings.
    options: Value,
    inputs: BTreeMap<PathBuf, String>,
    outputs: BTreeMap<PathBuf, String>,
    images: Vec<Value>,
}

impl RunLog {
    pub fn new(command: &str, config: &Effective, options: Value) -> Self {
        Self {
            schema: RUN_LOG_SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.clone(),
            options,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            images: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.to_path_buf(), digest);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = sha256_file(path)?;
        self.outputs.insert(path.to_path_buf(), digest);
        Ok(())
    }

    pub fn image(&mut self, stats: impl Serialize) {
        self.images
            .push(serde_json::to_value(stats).expect("stats serialize"));
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let text = serde_json::to_string_pretty(self).expect("run log serializes");
        fs::write(path, text + "\n")
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        log::debug!("run log written to {}", path.display());
        Ok(())
    }
}
