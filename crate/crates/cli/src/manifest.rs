//! Run manifests: what was run, with which inputs, producing which bytes.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{config_bytes, ExperimentConfig};
use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub core: String,
    pub cli: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions { core: manidens_core::VERSION.into(), cli: env!("CARGO_PKG_VERSION").into() }
    }
}

/// Everything needed to replay a run and check its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical config serialization.
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub versions: Versions,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig, seed: u64, started_unix: f64) -> Self {
        RunManifest {
            command: command.into(),
            config_sha256: sha256_hex(&config_bytes(config)),
            config: config.clone(),
            seed,
            versions: Versions::current(),
            started_unix,
            finished_unix: started_unix,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(FileDigest { path: path.to_path_buf(), sha256: digest_file(path)? });
        Ok(())
    }

    /// Records `dir/name`.
    pub fn add_output(&mut self, dir: &Path, name: &str) -> CliResult<()> {
        self.outputs.push(FileDigest { path: PathBuf::from(name), sha256: digest_file(&dir.join(name))? });
        Ok(())
    }

    /// Outputs under `dir` whose digest differs from the recorded one.
    pub fn mismatches(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let mut bad = Vec::new();
        for f in &self.outputs {
            let p = dir.join(&f.path);
            if !p.exists() || digest_file(&p)? != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }

    /// Checks that the embedded config still hashes to the recorded digest.
    pub fn config_intact(&self) -> bool {
        sha256_hex(&config_bytes(&self.config)) == self.config_sha256
    }
}
