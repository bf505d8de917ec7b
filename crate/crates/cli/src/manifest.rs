//! Run manifests: every subcommand records what it read, what it wrote, and
//! the hashes needed to reproduce the run.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub corpus_sha256: String,
    pub space_fingerprint: String,
    pub model_id: String,
    pub seeds: Vec<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub artifacts: Vec<String>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    dir: PathBuf,
}

impl ManifestBuilder {
    pub fn start(command: &str, config: &Config) -> std::io::Result<Self> {
        let now = chrono::Utc::now().to_rfc3339();
        Ok(ManifestBuilder {
            manifest: RunManifest {
                command: command.to_string(),
                config_path: config.config_path.display().to_string(),
                config_sha256: sha256_file(&config.config_path)?,
                corpus_sha256: sha256_file(&config.corpus_path)?,
                space_fingerprint: config.space.fingerprint(),
                model_id: config.raw.gateway.model_id.clone(),
                seeds: config.raw.seeds.clone(),
                started_at: now.clone(),
                finished_at: now,
                artifacts: Vec::new(),
            },
            dir: config.artifacts_dir.clone(),
        })
    }

    /// Record an artifact path this run wrote.
    pub fn add(&mut self, path: &Path) {
        self.manifest.artifacts.push(path.display().to_string());
    }

    /// Write `manifest_<command>.json` into the artifacts directory.
    pub fn finish(mut self) -> std::io::Result<PathBuf> {
        self.manifest.finished_at = chrono::Utc::now().to_rfc3339();
        let path = self.dir.join(format!("manifest_{}.json", self.manifest.command));
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(path)
    }
}
