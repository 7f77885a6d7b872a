use std::fs;
use std::path::Path;
use std::process::Command;

use msalab::ensemble::{DisorderModel, Distribution};
use msalab::runner::{self, Experiment, ExperimentConfig};

fn msalab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_msalab")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const MODEL: &str = r#"
[model]
coupling = 1.0
distribution = "uniform_symmetric"
master_seed = 5
"#;

#[test]
fn identical_config_twice_gives_identical_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(
        Experiment::Wegner,
        DisorderModel::new(1.0, Distribution::UniformSymmetric, 9).unwrap(),
    );
    cfg.trials = 100;
    cfg.out = Some(dir.path().join("a"));
    let a = runner::run(&cfg).unwrap();
    cfg.out = Some(dir.path().join("b"));
    cfg.workers = Some(2);
    let b = runner::run(&cfg).unwrap();
    assert_eq!(a.files, b.files);
    cfg.model.master_seed = 10;
    cfg.out = Some(dir.path().join("c"));
    let c = runner::run(&cfg).unwrap();
    assert_ne!(a.files, c.files);
}

#[test]
fn free_bootstrap_passes_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(
        Experiment::Bootstrap,
        DisorderModel::new(0.0, Distribution::UniformSymmetric, 1).unwrap(),
    );
    cfg.bootstrap.energy = -1.0;
    cfg.bootstrap.config.l0 = 60;
    cfg.out = Some(dir.path().to_path_buf());
    let m = runner::run(&cfg).unwrap();
    assert_eq!(m.passed, Some(true));
    let data = fs::read_to_string(dir.path().join(runner::DATA_FILE)).unwrap();
    assert!(data.lines().skip(1).all(|l| l.ends_with(",PASS")), "{data}");
}

#[test]
fn cli_oracle_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "o.toml", &format!("{MODEL}\n[oracle]\ninstances = 8\n"));
    let out = dir.path().join("out");
    let (code, stdout, _) = msalab(&["oracle", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("\"all_pass\": true"));
    for f in [runner::SUMMARY_FILE, runner::DATA_FILE, runner::MANIFEST_FILE] {
        assert!(out.join(f).exists());
    }
    let m = runner::read_manifest(&out.join(runner::MANIFEST_FILE)).unwrap();
    assert!(m.complete);
    assert_eq!(m.master_seed, 5);
}

#[test]
fn cli_seed_override_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n.toml", &format!("trials = 30\n{MODEL}\n[ne]\nscales = [12, 18]\n"));
    let out = dir.path().join("run");
    let (code, _, err) = msalab(&["ne", "--config", &cfg, "--seed", "77", "--workers", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let manifest = out.join(runner::MANIFEST_FILE);
    assert_eq!(runner::read_manifest(&manifest).unwrap().master_seed, 77);
    let again = dir.path().join("again");
    let (code, stdout, err) = msalab(&[
        "replay",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(stdout.matches("identical").count(), 2);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let bad = write_config(
        dir.path(),
        "bad.toml",
        &format!("{MODEL}\n[msa.schedule.params]\np = 1.0\np_prime = 0.5\n"),
    );
    let (code, _, err) = msalab(&["msa", "--config", &bad, "--out", out]);
    assert_eq!(code, 1);
    assert!(err.contains("0 < p < p′"), "{err}");

    let (code, _, _) = msalab(&["nonsense", "--config", &bad]);
    assert_eq!(code, 1);

    let mismatch = write_config(dir.path(), "m.toml", &format!("experiment = \"ne\"\n{MODEL}"));
    let (code, _, _) = msalab(&["wegner", "--config", &mismatch, "--out", out]);
    assert_eq!(code, 1);

    // 3-d box of side 30 has 29³ = 24389 sites, above the dense cap.
    let big = write_config(
        dir.path(),
        "big.toml",
        &format!("dim = 3\ntrials = 1\n{MODEL}\n[ne]\nscales = [30]\n"),
    );
    let (code, _, err) = msalab(&["ne", "--config", &big, "--out", out]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("dense cap"));
}

#[test]
fn incomplete_manifest_is_not_replayed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(
        Experiment::Ne,
        DisorderModel::new(1.0, Distribution::UniformSymmetric, 1).unwrap(),
    );
    cfg.trials = 5;
    cfg.out = Some(dir.path().join("a"));
    let mut m = runner::run(&cfg).unwrap();
    m.complete = false;
    let path = dir.path().join("a").join(runner::MANIFEST_FILE);
    fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let err = runner::replay(&path, dir.path().join("b"), None).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
