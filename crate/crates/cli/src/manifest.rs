//! Artifact manifest: every file a command writes, with content hashes, so
//! runs are auditable and reproducibility checks can diff a whole output
//! directory at once.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    /// True when any produced artifact is partial or failed.
    pub invalid: bool,
    pub artifacts: Vec<ManifestEntry>,
}

/// Collects artifact paths during a command, then writes the manifest once.
pub struct ManifestBuilder {
    out_dir: PathBuf,
    command: String,
    invalid: bool,
    paths: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(out_dir: impl Into<PathBuf>, command: &str) -> ManifestBuilder {
        ManifestBuilder {
            out_dir: out_dir.into(),
            command: command.to_string(),
            invalid: false,
            paths: Vec::new(),
        }
    }

    pub fn add(&mut self, path: impl Into<PathBuf>) {
        self.paths.push(path.into());
    }

    pub fn mark_invalid(&mut self) {
        self.invalid = true;
    }

    /// Hash every artifact and write `manifest.json` into the out dir.
    pub fn write(mut self) -> Result<PathBuf> {
        self.paths.sort();
        self.paths.dedup();
        let mut artifacts = Vec::with_capacity(self.paths.len());
        for path in &self.paths {
            let bytes = fs::read(path)
                .with_context(|| format!("hashing artifact {}", path.display()))?;
            let rel = path
                .strip_prefix(&self.out_dir)
                .unwrap_or(path)
                .to_string_lossy()
                .replace('\\', "/");
            artifacts.push(ManifestEntry {
                path: rel,
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
            });
        }
        let manifest = Manifest {
            manifest_version: MANIFEST_VERSION,
            command: self.command,
            invalid: self.invalid,
            artifacts,
        };
        let path = self.out_dir.join("manifest.json");
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        fs::write(&path, json)
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(path)
    }
}
