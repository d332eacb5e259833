//! Experiment harness: configuration, dispatch, CSV tables and run manifests.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::Path;
use std::time::Instant;

use msa_core::localization::LocalizationError;
use msa_core::msa::MsaError;
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::experiments::{dispatch, ExperimentOutput};
use crate::output::{attestation, sha256_hex, write_manifest, write_tables, RunManifest};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("refused: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Msa(#[from] MsaError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl LabError {
    /// `2` for refusals before any computation, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) | LabError::Infeasible(_) => 2,
            _ => 1,
        }
    }
}

pub struct RunResult {
    pub manifest: RunManifest,
    pub output: ExperimentOutput,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        if self.output.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Validates, runs and writes `<out>/table_*.csv` and `<out>/manifest.json`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult, LabError> {
    cfg.validate()?;
    let start = Instant::now();
    let output = dispatch(cfg)?;
    let dir = Path::new(&cfg.out);
    let table_hashes = write_tables(dir, &output.tables, &output.json)?;
    let manifest = RunManifest {
        experiment: cfg.experiment.to_string(),
        config_hash: sha256_hex(cfg.to_text().as_bytes()),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.master_seed,
        seeds: output.seeds.clone(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        attestation: attestation(&table_hashes),
        table_hashes,
        invariant_failures: output.failures.clone(),
    };
    write_manifest(dir, &manifest)?;
    Ok(RunResult { manifest, output })
}

/// Runs `f` on a pool of `workers` threads, or the global pool when `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}
