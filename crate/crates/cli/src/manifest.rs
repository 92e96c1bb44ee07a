//! Per-run manifest: what ran, with what configuration, what it produced.
//! Written atomically (temp file + rename) when a run finishes.

use jwdm_core::error::Result;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub artifacts: Vec<String>,
    pub wall_clock_secs: f64,
    pub exit_status: i32,
}

pub struct ManifestBuilder {
    subcommand: String,
    config: serde_json::Value,
    artifacts: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config,
            artifacts: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    /// Finish and write `manifest.json` into `dir`. On success every listed
    /// artifact must already exist.
    pub fn write(self, dir: &Path, exit_status: i32) -> Result<PathBuf> {
        if exit_status == 0 {
            for a in &self.artifacts {
                if !a.exists() {
                    return Err(jwdm_core::Error::InvalidArg(format!(
                        "manifest lists missing artifact {}",
                        a.display()
                    )));
                }
            }
        }
        std::fs::create_dir_all(dir)?;
        let manifest = RunManifest {
            subcommand: self.subcommand,
            config: self.config,
            artifacts: self
                .artifacts
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
            exit_status,
        };
        let path = dir.join("manifest.json");
        let tmp = dir.join("manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(&manifest)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }
}
