//! `manifest.json`: what ran, with which settings, over which bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use cfx_core::io::file_sha256;
use serde::{Deserialize, Serialize};

use crate::config::Config;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub elapsed_secs: f64,
    /// Wall time per ablation variant or sweep value, when the command has them.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parts: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    /// The subcommand with its arguments, enough to run it again.
    pub invocation: serde_json::Value,
    pub config: Config,
    pub seed: u64,
    pub explain_seed: u64,
    /// SHA-256 of every file read, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every file written, keyed by file name inside the output directory.
    pub outputs: BTreeMap<String, String>,
    pub timing: Timing,
}

/// Collects hashes while a command runs.
pub struct Recorder {
    started: Instant,
    started_unix: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
    pub parts: BTreeMap<String, f64>,
}

impl Default for Recorder {
    fn default() -> Self {
        Self::new()
    }
}

impl Recorder {
    pub fn new() -> Self {
        Self {
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            parts: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let h = file_sha256(path)?;
        self.inputs.insert(path.display().to_string(), h);
        Ok(())
    }

    /// Hashes every regular file in `dir` except an earlier run's manifest.
    pub fn input_dir(&mut self, dir: &Path) -> Result<()> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("cannot list {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != MANIFEST))
            .collect();
        files.sort();
        for f in files {
            self.input(&f)?;
        }
        Ok(())
    }

    pub fn output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn finish(
        self,
        command: &str,
        invocation: serde_json::Value,
        config: &Config,
        out: &Path,
    ) -> Result<Manifest> {
        let mut outputs = BTreeMap::new();
        for p in &self.outputs {
            let name = p.strip_prefix(out).unwrap_or(p).display().to_string();
            outputs.insert(name, file_sha256(p)?);
        }
        let m = Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            invocation,
            config: config.clone(),
            seed: config.seed,
            explain_seed: config.explainer().seed,
            inputs: self.inputs,
            outputs,
            timing: Timing {
                started_unix: self.started_unix,
                elapsed_secs: self.started.elapsed().as_secs_f64(),
                parts: self.parts,
            },
        };
        let text = serde_json::to_string_pretty(&m)? + "\n";
        std::fs::write(out.join(MANIFEST), text)
            .with_context(|| format!("cannot write manifest in {}", out.display()))?;
        Ok(m)
    }
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("{} is not a manifest", path.display()))
    }

    /// Output files whose hashes differ between the two runs, plus files
    /// present in only one of them.
    pub fn differing_outputs(&self, other: &Manifest) -> Vec<String> {
        let mut names: Vec<&String> = self.outputs.keys().chain(other.outputs.keys()).collect();
        names.sort();
        names.dedup();
        names
            .into_iter()
            .filter(|n| self.outputs.get(*n) != other.outputs.get(*n))
            .cloned()
            .collect()
    }
}
