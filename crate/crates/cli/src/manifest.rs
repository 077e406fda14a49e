use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{SecondsFormat, Utc};
use mixgen_core::bundle::to_json;
use mixgen_core::data::sha256_hex;
use serde::Serialize;
use serde_json::Value;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct OutputFile {
    /// Relative to the run directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// One per artifact-producing invocation, written last.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    /// Effective arguments after merging the config file, minus the output directory.
    pub config: Value,
    pub config_digest: String,
    pub dataset_sha256: Option<String>,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputFile>,
    /// Command-specific figures such as RMSE or warnings.
    pub results: Value,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// A fresh run directory. Refuses to reuse one that already has content.
pub struct RunDir {
    pub path: PathBuf,
    command: String,
    config: Value,
    started_at: String,
    outputs: Vec<PathBuf>,
}

impl RunDir {
    pub fn create<A: Serialize>(path: &Path, command: &str, args: &A) -> Result<Self> {
        if path.exists() {
            let mut entries = fs::read_dir(path).with_context(|| format!("reading {}", path.display()))?;
            if entries.next().is_some() {
                bail!("output directory {} is not empty; runs never overwrite earlier results", path.display());
            }
        }
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        let mut config = serde_json::to_value(args)?;
        if let Value::Object(m) = &mut config {
            m.remove("out");
        }
        Ok(Self {
            path: path.to_path_buf(),
            command: command.into(),
            config,
            started_at: now(),
            outputs: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path.join(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.outputs.push(p.clone());
        Ok(p)
    }

    /// Registers files written by other code.
    pub fn record(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.outputs.extend(paths);
    }

    pub fn finish(self, dataset_sha256: Option<String>, seed: Option<u64>, results: Value) -> Result<PathBuf> {
        let mut outputs = Vec::new();
        for p in &self.outputs {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            let rel = p.strip_prefix(&self.path).unwrap_or(p).to_string_lossy().into_owned();
            outputs.push(OutputFile { path: rel, bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
        }
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_digest: sha256_hex(&to_json(&self.config)),
            config: self.config,
            dataset_sha256,
            seed,
            started_at: self.started_at,
            finished_at: now(),
            outputs,
            results,
        };
        let p = self.path.join(MANIFEST_FILE);
        fs::write(&p, to_json(&manifest)).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }
}
