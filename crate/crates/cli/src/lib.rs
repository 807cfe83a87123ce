//! Experiment runner behind the `kolmo` binary: one TOML file describes one
//! experiment; a run writes CSV grids, JSON results and a manifest that
//! hashes them.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use experiments::{Descriptor, RunOutput, DESCRIPTORS};
pub use manifest::RunManifest;

/// Default output root when neither `--out` nor `out` is given.
pub const OUT_DIR_ENV: &str = "KOLMO_OUT_DIR";

/// `--out`, then the config's `out`, then `$KOLMO_OUT_DIR/<experiment>`,
/// then `kolmo-runs/<experiment>`.
pub fn output_dir(cli_out: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = cli_out.or(cfg.out.as_deref()) {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("kolmo-runs"));
    root.join(cfg.experiment.key())
}

pub struct RunSummary {
    pub manifest: PathBuf,
    pub run: RunOutput,
}

/// Loads, checks and executes one experiment, then writes its artifacts.
/// Nothing is written unless the whole computation succeeded.
pub fn run(config: &Path, overrides: &[String], seed: Option<u64>, out: Option<&Path>) -> Result<RunSummary, CliError> {
    let mut all = overrides.to_vec();
    if let Some(s) = seed {
        all.push(format!("seed={s}"));
    }
    let cfg = config::load(config, &all)?;
    let run = experiments::execute(&cfg)?;
    let dir = output_dir(out, &cfg);
    let manifest = manifest::write_run(&dir, &cfg, &run)?;
    Ok(RunSummary { manifest, run })
}

pub fn list_text() -> String {
    let mut s = String::new();
    for d in &DESCRIPTORS {
        let keys = |v: &[&str]| if v.is_empty() { "-".to_string() } else { v.join(", ") };
        let _ = writeln!(s, "{}", d.name);
        let _ = writeln!(s, "    {}", d.summary);
        let _ = writeln!(s, "    required:  {}", keys(d.required));
        let _ = writeln!(s, "    optional:  {}", keys(d.optional));
        let _ = writeln!(s, "    artifacts: {}, manifest.json", d.artifacts.join(", "));
    }
    s
}
