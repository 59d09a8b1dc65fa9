//! Per-run manifest: what ran, with which settings, on which inputs, and
//! what it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::io::{read_json, sha256_file, write_json, IoResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub command: String,
    /// Full command line, program name excluded.
    pub args: Vec<String>,
    pub seed: u64,
    pub config: RunConfig,
    /// Canonical path of the review file the run read, if any.
    #[serde(default)]
    pub reviews: Option<String>,
    /// Input path → SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name (relative to the run directory) → SHA-256.
    pub artifacts: BTreeMap<String, String>,
    pub wall_time_seconds: f64,
    pub threads: usize,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], config: &RunConfig) -> Self {
        RunManifest {
            version: MANIFEST_VERSION,
            command: command.to_string(),
            args: args.to_vec(),
            seed: config.training.seed,
            config: config.clone(),
            reviews: None,
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            wall_time_seconds: 0.0,
            threads: 1,
        }
    }

    /// Records `path` with its hash and returns the canonical key.
    pub fn add_input(&mut self, path: &Path) -> IoResult<String> {
        let hash = sha256_file(path)?;
        let key = path.canonicalize().unwrap_or_else(|_| path.to_path_buf()).display().to_string();
        self.inputs.insert(key.clone(), hash);
        Ok(key)
    }

    /// Hashes `name` inside `dir`.
    pub fn add_artifact(&mut self, dir: &Path, name: &str) -> IoResult<()> {
        let hash = sha256_file(&dir.join(name))?;
        self.artifacts.insert(name.to_string(), hash);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> IoResult<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> IoResult<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), b"abc").unwrap();
        let mut m = RunManifest::new("train", &["--seed".into(), "3".into()], &RunConfig::default());
        m.add_artifact(dir.path(), "a.txt").unwrap();
        m.wall_time_seconds = 1.5;
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            back.artifacts["a.txt"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
