//! Per-run manifest written as `manifest.toml` in every output directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub software: String,
    pub seed: u64,
    pub duration_seconds: f64,
    /// Parents of the stored chain, for commands that keep draws.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parents: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputFile>,
    pub config: Config,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn digest(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, elapsed: Duration, config: &Config) -> Self {
        Self {
            command: command.to_string(),
            software: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            seed,
            duration_seconds: elapsed.as_secs_f64(),
            parents: None,
            input: None,
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(manet_core::io::layout::MANIFEST);
        let text = toml::to_string(self).context("serialising manifest")?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(manet_core::io::layout::MANIFEST);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
