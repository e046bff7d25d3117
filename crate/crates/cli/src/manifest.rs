//! Run manifest: which stages ran, what was written, and content hashes.
//! The manifest hash covers the config hash plus the sorted output-file
//! hashes, so two runs with the same config and seed produce the same
//! manifest hash even though stage timings differ.

use anyhow::Context;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::hex_digest;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<OutputRecord>,
    /// SHA-256 over the config hash and the sorted output hashes.
    pub manifest_hash: String,
    pub resolved_config: serde_json::Value,
    /// Present when a pipeline halted early.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Collects outputs and timings during a run and writes the manifest
/// atomically at the end.
pub struct RunRecorder {
    out_dir: PathBuf,
    config_hash: String,
    seed: u64,
    resolved_config: serde_json::Value,
    stages: Vec<StageRecord>,
    outputs: Vec<OutputRecord>,
    current: Option<(String, Instant)>,
}

impl RunRecorder {
    pub fn new(
        out_dir: &Path,
        config_hash: String,
        seed: u64,
        resolved_config: serde_json::Value,
    ) -> anyhow::Result<Self> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output dir {}", out_dir.display()))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            config_hash,
            seed,
            resolved_config,
            stages: Vec::new(),
            outputs: Vec::new(),
            current: None,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn begin_stage(&mut self, name: &str) {
        self.end_stage();
        log::info!("stage {name}");
        self.current = Some((name.to_string(), Instant::now()));
    }

    pub fn end_stage(&mut self) {
        if let Some((name, start)) = self.current.take() {
            self.stages.push(StageRecord {
                name,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }

    /// Resolve a path inside the output directory and register the file
    /// after `write` populated it.
    pub fn emit<F>(&mut self, name: &str, write: F) -> anyhow::Result<PathBuf>
    where
        F: FnOnce(&Path) -> fecg_core::Result<()>,
    {
        let path = self.out_dir.join(name);
        write(&path).with_context(|| format!("writing {}", path.display()))?;
        let bytes = std::fs::read(&path)?;
        self.outputs.push(OutputRecord {
            path: name.to_string(),
            sha256: hex_digest(&bytes),
        });
        Ok(path)
    }

    /// Register a file written through other means (serde_json etc.).
    pub fn register(&mut self, name: &str) -> anyhow::Result<()> {
        let bytes = std::fs::read(self.out_dir.join(name))?;
        self.outputs.push(OutputRecord {
            path: name.to_string(),
            sha256: hex_digest(&bytes),
        });
        Ok(())
    }

    pub fn finish(mut self, error: Option<String>) -> anyhow::Result<RunManifest> {
        self.end_stage();
        let mut sorted: Vec<String> = self
            .outputs
            .iter()
            .map(|o| format!("{}:{}", o.path, o.sha256))
            .collect();
        sorted.sort();
        let manifest_hash = hex_digest(format!("{}|{}", self.config_hash, sorted.join("|")).as_bytes());
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config_hash,
            seed: self.seed,
            stages: self.stages,
            outputs: self.outputs,
            manifest_hash,
            resolved_config: self.resolved_config,
            error,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        let tmp = self.out_dir.join("manifest.json.tmp");
        std::fs::write(&tmp, &text)?;
        std::fs::rename(&tmp, self.out_dir.join("manifest.json"))?;
        Ok(manifest)
    }
}
