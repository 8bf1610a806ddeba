use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Only environment variable the tool reads.
pub const OUT_ENV: &str = "ADJSET_OUT";

#[derive(Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: serde_json::Value,
    /// Input path to lowercase hex SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub version: &'static str,
}

impl RunManifest {
    pub fn new(command: &[String], config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_vec(),
            config,
            inputs: BTreeMap::new(),
            seed,
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(bytes)));
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        write_file(&dir.join("manifest.json"), text + "\n")
    }
}

/// `--out`, then `$ADJSET_OUT`, then `adjset-out`.
pub fn output_dir(flag: Option<&PathBuf>) -> Result<PathBuf> {
    let dir = match flag {
        Some(d) => d.clone(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("adjset-out")),
    };
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}
