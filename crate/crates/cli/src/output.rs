//! Artifacts are collected in memory and written in one go, followed by a
//! manifest with their SHA-256 checksums. Nothing is written when a command
//! fails before [`Outputs::commit`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct ArtifactEntry {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: String,
    seed: Option<u64>,
    stage_seeds: BTreeMap<&'static str, u64>,
    artifacts: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Default)]
pub struct Outputs {
    files: BTreeMap<String, Vec<u8>>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(path.into(), bytes.into());
    }

    pub fn add_json<T: Serialize>(&mut self, path: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(causal_distill::Error::from)?;
        text.push('\n');
        self.add(path, text);
        Ok(())
    }

    /// Writes every artifact under `dir` plus the manifest.
    ///
    /// `config` is hashed through its JSON form; paths and thread counts stay
    /// out of it so that the manifest is identical across output locations.
    pub fn commit<C: Serialize>(
        self,
        dir: &Path,
        command: &str,
        config: &C,
        seed: Option<u64>,
        stage_seeds: BTreeMap<&'static str, u64>,
    ) -> Result<(), CliError> {
        let config_json = serde_json::to_vec(config).map_err(causal_distill::Error::from)?;
        let artifacts = self
            .files
            .iter()
            .map(|(path, bytes)| ArtifactEntry {
                path: path.clone(),
                bytes: bytes.len(),
                sha256: sha256_hex(bytes),
            })
            .collect();
        let manifest = Manifest {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: sha256_hex(&config_json),
            seed,
            stage_seeds,
            artifacts,
        };
        let mut manifest_text = serde_json::to_string_pretty(&manifest).map_err(causal_distill::Error::from)?;
        manifest_text.push('\n');

        for (path, bytes) in &self.files {
            let target = dir.join(path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(&parent.display().to_string(), e))?;
            }
            std::fs::write(&target, bytes).map_err(|e| CliError::io(&target.display().to_string(), e))?;
        }
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(&dir.display().to_string(), e))?;
        let target = dir.join(MANIFEST);
        std::fs::write(&target, manifest_text).map_err(|e| CliError::io(&target.display().to_string(), e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
