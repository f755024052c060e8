//! Run manifests written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::sha256_hex;

#[derive(Debug, Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct StageEntry {
    name: String,
    wall_time_s: f64,
}

/// Collects outputs and stage timings; written as `<command>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    config_digest: Option<String>,
    seed: u64,
    effective: Value,
    outputs: Vec<OutputEntry>,
    stages: Vec<StageEntry>,
    #[serde(skip)]
    out_dir: PathBuf,
}

impl RunManifest {
    pub fn new(command: &str, out_dir: &Path, config_digest: Option<String>, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_digest,
            seed,
            effective: Value::Null,
            outputs: Vec::new(),
            stages: Vec::new(),
            out_dir: out_dir.to_path_buf(),
        })
    }

    /// Records the effective settings after flags and config are merged.
    pub fn set_effective(&mut self, effective: Value) {
        self.effective = effective;
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.stages.push(StageEntry {
            name: name.to_string(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    pub fn write(&mut self, file: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(file);
        std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(OutputEntry {
            file: file.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(path)
    }

    pub fn finish(self) -> Result<PathBuf> {
        let path = self.out_dir.join(format!("{}.manifest.json", self.command));
        let text = serde_json::to_string_pretty(&self)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
