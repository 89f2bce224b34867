use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use red_core::io::write_json;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Completion record of one command, written after every other output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    /// Paths relative to the output directory.
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub duration_secs: f64,
}

/// Collects what a command read and wrote, then seals the output directory.
pub struct Run {
    command: String,
    out_dir: PathBuf,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(command: &str, out_dir: &Path) -> Self {
        Self {
            command: command.into(),
            out_dir: out_dir.to_path_buf(),
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        let rel = p.strip_prefix(&self.out_dir).unwrap_or(p).to_path_buf();
        self.outputs.push(rel);
    }

    pub fn finish(self, config: serde_json::Value, seeds: Vec<u64>) -> anyhow::Result<()> {
        let manifest = RunManifest {
            command: self.command,
            config,
            seeds,
            inputs: self.inputs,
            outputs: self.outputs,
            version: env!("CARGO_PKG_VERSION").into(),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        write_json(&self.out_dir.join(MANIFEST_NAME), &manifest)?;
        Ok(())
    }
}
