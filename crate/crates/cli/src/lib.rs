//! Experiment driver: configuration, snapshots, run manifests and the
//! subcommands of the `anisocahn` binary.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod snapshot;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anisocahn::{Error, Result};
use serde::{Deserialize, Serialize};

pub use config::ExperimentConfig;

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// A named pass/fail check with the measured value and its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

/// How a subcommand ended when it did not error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Certified,
    CertificateFailed,
    /// Stopped early on request after writing a checkpoint.
    Interrupted,
}

impl Outcome {
    pub fn from_checks(checks: &[Check]) -> Self {
        if checks.iter().all(|c| c.passed) {
            Self::Certified
        } else {
            Self::CertificateFailed
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Self::Certified | Self::Interrupted => 0,
            Self::CertificateFailed => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub threads: usize,
    pub stages: Vec<StageTiming>,
    /// Every file the run wrote, relative to the output directory.
    pub artifacts: Vec<String>,
    pub outcome: String,
}

/// Output directory, configuration and manifest of one subcommand run.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    manifest: RunManifest,
}

pub const MANIFEST: &str = "manifest.json";

impl Run {
    pub fn new(cfg: ExperimentConfig, command: &str) -> Result<Self> {
        let out = cfg.output_dir();
        std::fs::create_dir_all(&out)?;
        let manifest = RunManifest {
            command: command.into(),
            config_hash: cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed(),
            threads: cfg.get("threads")?,
            stages: Vec::new(),
            artifacts: Vec::new(),
            outcome: String::new(),
        };
        Ok(Self { cfg, out, manifest })
    }

    pub fn stage<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<R>) -> Result<R> {
        let start = Instant::now();
        let r = f(self)?;
        self.manifest.stages.push(StageTiming {
            stage: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(r)
    }

    fn register(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.out).unwrap_or(path).to_string_lossy().into_owned();
        if !self.manifest.artifacts.contains(&rel) {
            self.manifest.artifacts.push(rel);
        }
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out.join(name);
        write_atomic(&path, bytes)?;
        self.register(&path);
        Ok(path)
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn write_csv<S: Serialize>(&mut self, name: &str, rows: &[S]) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        self.write_bytes(name, &bytes)
    }

    pub fn snapshot(&mut self, name: &str, u: &anisocahn::ScalarField<f64>, eps: f64, delta: f64) -> Result<()> {
        let hash = self.manifest.config_hash.clone();
        for p in snapshot::write_snapshot(&self.out.join(name), u, eps, delta, &hash)? {
            self.register(&p);
        }
        Ok(())
    }

    /// Records a file written by other means (checkpoints).
    pub fn record(&mut self, path: &Path) {
        self.register(path);
    }

    pub fn config_hash(&self) -> &str {
        &self.manifest.config_hash
    }

    /// Writes the manifest atomically and returns the outcome.
    pub fn finish(mut self, outcome: Outcome) -> Result<Outcome> {
        self.manifest.outcome = format!("{outcome:?}");
        self.manifest.artifacts.sort();
        let mut bytes = serde_json::to_vec_pretty(&self.manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.out.join(MANIFEST), &bytes)?;
        Ok(outcome)
    }
}
