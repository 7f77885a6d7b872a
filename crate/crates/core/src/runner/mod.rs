//! Configuration, experiment dispatch and the reproducibility envelope.
//!
//! A run validates its config, computes on a worker pool of the requested
//! size, and writes `summary.json`, `data.csv` and `manifest.json` to the
//! output directory. The manifest is written first with `complete = false`
//! and rewritten after the data files are in place. Data files go through a
//! temporary name and a rename, so a crash leaves either no file or an
//! incomplete manifest.

mod config;
mod experiments;

pub use config::{
    validate, BootstrapExperiment, DynamicsParams, Experiment, ExperimentConfig, LocalizationParams, LyapunovParams,
    MsaExperiment, NeParams, OracleParams, RatioParams, WegnerParams,
};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const DATA_FILE: &str = "data.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChecksum {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub artifact_version: String,
    pub master_seed: u64,
    pub wall_time_seconds: f64,
    pub complete: bool,
    /// Outcome of experiments that are checks (oracle, bootstrap).
    pub passed: Option<bool>,
    pub files: Vec<FileChecksum>,
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.partial"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

fn checksum(name: &str, bytes: &[u8]) -> FileChecksum {
    FileChecksum {
        name: name.into(),
        sha256: hex::encode(Sha256::digest(bytes)),
        bytes: bytes.len() as u64,
    }
}

fn csv_bytes(table: &experiments::Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| Error::Serialization(e.to_string()))
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    write_atomic(dir, MANIFEST_FILE, text.as_bytes())
}

/// Validates, computes and writes outputs into `cfg.out_dir()`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let problems = validate(cfg);
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    let mut manifest = RunManifest {
        config: cfg.clone(),
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.model.master_seed,
        wall_time_seconds: 0.0,
        complete: false,
        passed: None,
        files: Vec::new(),
    };
    for stale in [SUMMARY_FILE, DATA_FILE] {
        match fs::remove_file(dir.join(stale)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
            _ => {}
        }
    }
    write_manifest(&dir, &manifest)?;

    let start = Instant::now();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;
    let out = pool.install(|| experiments::dispatch(cfg))?;

    let mut summary = serde_json::to_string_pretty(&out.summary)?;
    summary.push('\n');
    let data = csv_bytes(&out.table)?;
    write_atomic(&dir, SUMMARY_FILE, summary.as_bytes())?;
    write_atomic(&dir, DATA_FILE, &data)?;

    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    manifest.files = vec![checksum(SUMMARY_FILE, summary.as_bytes()), checksum(DATA_FILE, &data)];
    manifest.passed = out.passed;
    manifest.complete = true;
    write_manifest(&dir, &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub original: RunManifest,
    pub replayed: RunManifest,
    /// Names of files whose checksums differ.
    pub mismatched: Vec<String>,
}

impl ReplayOutcome {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty()
    }
}

/// Re-runs the config recorded in a manifest into `out` and compares checksums.
pub fn replay(manifest_path: &Path, out: PathBuf, workers: Option<usize>) -> Result<ReplayOutcome> {
    let original = read_manifest(manifest_path)?;
    if !original.complete {
        return Err(Error::Validation(vec![format!(
            "{} is marked incomplete",
            manifest_path.display()
        )]));
    }
    let mut cfg = original.config.clone();
    cfg.out = Some(out);
    cfg.workers = workers;
    let replayed = run(&cfg)?;
    let mismatched = original
        .files
        .iter()
        .filter(|f| !replayed.files.contains(f))
        .map(|f| f.name.clone())
        .collect();
    Ok(ReplayOutcome {
        original,
        replayed,
        mismatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{DisorderModel, Distribution};

    fn model() -> DisorderModel {
        DisorderModel::new(1.0, Distribution::UniformSymmetric, 11).unwrap()
    }

    #[test]
    fn admissible_defaults_and_named_violations() {
        let mut cfg = ExperimentConfig::new(Experiment::Msa, model());
        assert!(validate(&cfg).is_empty(), "{:?}", validate(&cfg));
        cfg.msa.schedule.params.p_prime = 1.0;
        assert!(validate(&cfg).iter().any(|m| m.contains("0 < p < p′")));

        let mut cfg = ExperimentConfig::new(Experiment::Msa, model());
        cfg.msa.schedule.interval_stage = true;
        cfg.msa.schedule.params.theta = 3.0;
        cfg.msa.schedule.params.theta_prime = 2.9;
        cfg.msa.schedule.params.s = 2.2;
        cfg.msa.schedule.params.p_prime = 1.5;
        let v = validate(&cfg);
        assert!(v.iter().any(|m| m.contains("θ > 2p + (b+1)d")), "{v:?}");
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut cfg = ExperimentConfig::new(Experiment::Lyapunov, model());
        cfg.dim = 2;
        cfg.trials = 0;
        cfg.lyapunov.energies.clear();
        let v = validate(&cfg);
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn toml_roundtrip_and_unknown_fields() {
        let text = r#"
            experiment = "ne"
            trials = 10
            [model]
            coupling = 1.0
            distribution = "uniform_symmetric"
            master_seed = 3
            [ne]
            interval = [1.5, 2.5]
            scales = [12, 24]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.ne.scales, vec![12, 24]);
        assert_eq!(cfg.dim, 1);
        assert!(ExperimentConfig::from_toml(&text.replace("scales", "scale")).is_err());
    }

    #[test]
    fn run_writes_checksummed_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(Experiment::Ne, model());
        cfg.trials = 20;
        cfg.ne.scales = vec![12, 24];
        cfg.out = Some(dir.path().join("a"));
        cfg.workers = Some(1);
        let m = run(&cfg).unwrap();
        assert!(m.complete);
        for f in &m.files {
            let bytes = fs::read(dir.path().join("a").join(&f.name)).unwrap();
            assert_eq!(checksum(&f.name, &bytes), *f);
        }
        let on_disk = read_manifest(&dir.path().join("a").join(MANIFEST_FILE)).unwrap();
        assert_eq!(on_disk.files, m.files);
        let r = replay(&dir.path().join("a").join(MANIFEST_FILE), dir.path().join("b"), Some(2)).unwrap();
        assert!(r.identical());
    }

    #[test]
    fn invalid_config_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(Experiment::Sli, model());
        cfg.sli.scales = vec![20];
        cfg.out = Some(dir.path().join("x"));
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(!dir.path().join("x").exists());
    }
}
