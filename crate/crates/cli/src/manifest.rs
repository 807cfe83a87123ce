//! Run manifest and atomic artifact writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::experiments::{Artifact, RunOutput};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Wall-clock time is taken from `SOURCE_DATE_EPOCH` only, so that reruns
/// are byte-identical; without it the field is `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub source_date_epoch: Option<u64>,
}

impl Timestamps {
    pub fn from_env() -> Self {
        let epoch = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok());
        Self { source_date_epoch: epoch }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub timestamps: Timestamps,
    pub config: ExperimentConfig,
    pub outputs: Vec<OutputRecord>,
    pub fitted: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Writes `bytes` to a hidden sibling and renames it into place.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, &target)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err(&target))
}

pub fn build_manifest(cfg: &ExperimentConfig, run: &RunOutput) -> RunManifest {
    RunManifest {
        tool: "kolmo".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.experiment,
        seed: cfg.seed,
        timestamps: Timestamps::from_env(),
        config: cfg.clone(),
        outputs: run
            .artifacts
            .iter()
            .map(|a| OutputRecord { file: a.name.clone(), bytes: a.bytes.len() as u64, sha256: sha256_hex(&a.bytes) })
            .collect(),
        fitted: run.fitted.clone(),
    }
}

pub fn read_manifest(dir: &Path) -> Option<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Writes every artifact, drops files named by a previous manifest in the
/// same directory that this run did not produce, then writes the manifest.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, run: &RunOutput) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let previous = read_manifest(dir);
    for Artifact { name, bytes } in &run.artifacts {
        write_atomic(dir, name, bytes)?;
    }
    if let Some(old) = previous {
        for rec in old.outputs {
            let stale = !run.artifacts.iter().any(|a| a.name == rec.file);
            // Only plain names are ever written, so nothing outside `dir` is touched.
            if stale && !rec.file.contains(['/', '\\']) {
                let path = dir.join(&rec.file);
                if path.is_file() {
                    fs::remove_file(&path).map_err(io_err(&path))?;
                }
            }
        }
    }
    let manifest = build_manifest(cfg, run);
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    bytes.push(b'\n');
    write_atomic(dir, MANIFEST, &bytes)?;
    Ok(dir.join(MANIFEST))
}
