use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::DisorderModel;
use crate::error::{Error, Result};
use crate::msa::{admissibility, BootstrapConfig, RegularityKind, ScheduleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Wegner,
    Ne,
    Msa,
    Bootstrap,
    Sli,
    Edi,
    Decay,
    Dynamics,
    Correlator,
    Lyapunov,
    Oracle,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::Wegner,
        Experiment::Ne,
        Experiment::Msa,
        Experiment::Bootstrap,
        Experiment::Sli,
        Experiment::Edi,
        Experiment::Decay,
        Experiment::Dynamics,
        Experiment::Correlator,
        Experiment::Lyapunov,
        Experiment::Oracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Wegner => "wegner",
            Experiment::Ne => "ne",
            Experiment::Msa => "msa",
            Experiment::Bootstrap => "bootstrap",
            Experiment::Sli => "sli",
            Experiment::Edi => "edi",
            Experiment::Decay => "decay",
            Experiment::Dynamics => "dynamics",
            Experiment::Correlator => "correlator",
            Experiment::Lyapunov => "lyapunov",
            Experiment::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Validation(vec![format!("unknown experiment \"{s}\"")]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WegnerParams {
    pub energy: f64,
    pub etas: Vec<f64>,
    pub scales: Vec<u64>,
}

impl Default for WegnerParams {
    fn default() -> Self {
        WegnerParams {
            energy: 2.0,
            etas: vec![1e-3, 3e-3, 1e-2, 3e-2],
            scales: vec![12, 24, 48],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeParams {
    pub interval: (f64, f64),
    pub scales: Vec<u64>,
}

impl Default for NeParams {
    fn default() -> Self {
        NeParams {
            interval: (1.5, 2.5),
            scales: vec![12, 24, 48],
        }
    }
}

/// Single-box and two-box bad-event estimates along a scale schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsaExperiment {
    pub energy: f64,
    pub kind: RegularityKind,
    pub schedule: ScheduleConfig,
    pub two_box: bool,
    /// Half-width of the energy interval used by the two-box check.
    pub delta: f64,
    pub grid_n: usize,
}

impl Default for MsaExperiment {
    fn default() -> Self {
        MsaExperiment {
            energy: 0.0,
            kind: RegularityKind::Suitable { theta: 4.0 },
            schedule: ScheduleConfig::default(),
            two_box: true,
            delta: 0.0,
            grid_n: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapExperiment {
    pub energy: f64,
    pub config: BootstrapConfig,
}

impl Default for BootstrapExperiment {
    fn default() -> Self {
        BootstrapExperiment {
            energy: 0.0,
            config: BootstrapConfig::default(),
        }
    }
}

/// SLI and EDI ratio scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioParams {
    pub energy: f64,
    pub scales: Vec<u64>,
}

impl Default for RatioParams {
    fn default() -> Self {
        RatioParams {
            energy: 0.0,
            scales: vec![36, 72],
        }
    }
}

/// Eigenfunction decay and correlator scans on one box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationParams {
    pub interval: (f64, f64),
    pub side: u64,
}

impl Default for LocalizationParams {
    fn default() -> Self {
        LocalizationParams {
            interval: (-0.5, 0.5),
            side: 216,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsParams {
    pub interval: (f64, f64),
    pub side: u64,
    /// Moment order `n` in `⟨x⟩^n`.
    pub n: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub t_ref: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        DynamicsParams {
            interval: (-0.5, 0.5),
            side: 216,
            n: 2.0,
            t_min: 0.1,
            t_max: 1e4,
            points: 101,
            t_ref: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovParams {
    pub energies: Vec<f64>,
    pub sites: u64,
    pub batches: usize,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        LyapunovParams {
            energies: vec![0.0],
            sites: 1_000_000,
            batches: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    pub instances: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams { instances: 50 }
    }
}

fn default_dim() -> usize {
    1
}

fn default_trials() -> u64 {
    200
}

/// One experiment: the ensemble, the dimension, and a parameter block per
/// experiment kind (only the block named by `experiment` is read).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: DisorderModel,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Size of the trial worker pool; `None` uses every core.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub wegner: WegnerParams,
    #[serde(default)]
    pub ne: NeParams,
    #[serde(default)]
    pub msa: MsaExperiment,
    #[serde(default)]
    pub bootstrap: BootstrapExperiment,
    #[serde(default)]
    pub sli: RatioParams,
    #[serde(default)]
    pub edi: RatioParams,
    #[serde(default)]
    pub decay: LocalizationParams,
    #[serde(default)]
    pub dynamics: DynamicsParams,
    #[serde(default)]
    pub correlator: LocalizationParams,
    #[serde(default)]
    pub lyapunov: LyapunovParams,
    #[serde(default)]
    pub oracle: OracleParams,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, model: DisorderModel) -> Self {
        ExperimentConfig {
            experiment,
            model,
            dim: 1,
            trials: default_trials(),
            workers: None,
            out: None,
            wegner: Default::default(),
            ne: Default::default(),
            msa: Default::default(),
            bootstrap: Default::default(),
            sli: Default::default(),
            edi: Default::default(),
            decay: Default::default(),
            dynamics: Default::default(),
            correlator: Default::default(),
            lyapunov: Default::default(),
            oracle: Default::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file. When `experiment` is given it fills a missing
    /// `experiment` key and must agree with a present one.
    pub fn load(path: &Path, experiment: Option<Experiment>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut table: toml::Table = toml::from_str(&text)?;
        if let Some(e) = experiment {
            match table.get("experiment").and_then(|v| v.as_str()) {
                Some(named) if named != e.name() => {
                    return Err(Error::Validation(vec![format!(
                        "command line names experiment \"{}\" but the config names \"{named}\"",
                        e.name()
                    )]))
                }
                Some(_) => {}
                None => {
                    table.insert("experiment".into(), toml::Value::String(e.name().into()));
                }
            }
        }
        Ok(table.try_into()?)
    }

    /// Directory for outputs: `out`, or `msalab-out/<experiment>`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("msalab-out").join(self.experiment.name()))
    }

    /// The MSA schedule with `d` taken from the top-level dimension.
    pub(crate) fn msa_schedule(&self) -> ScheduleConfig {
        let mut s = self.msa.schedule;
        s.params.d = self.dim as u32;
        s
    }

    /// The bootstrap config with dimension and trial count taken from the top level.
    pub(crate) fn bootstrap_config(&self) -> BootstrapConfig {
        let mut c = self.bootstrap.config;
        c.dim = self.dim;
        c.params.d = self.dim as u32;
        c.trials = self.trials;
        c
    }
}

fn check_interval(out: &mut Vec<String>, name: &str, (lo, hi): (f64, f64)) {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        out.push(format!("{name}: interval [{lo}, {hi}] must be finite with lo ≤ hi"));
    }
}

fn check_scales(out: &mut Vec<String>, name: &str, scales: &[u64], step: u64, min: u64) {
    if scales.is_empty() {
        out.push(format!("{name}: at least one scale is required"));
    }
    for &l in scales {
        if l % step != 0 || l < min {
            out.push(format!("{name}: scale {l} must be a multiple of {step} and ≥ {min}"));
        }
    }
}

/// Every violated constraint of `cfg`; empty iff the config is runnable.
pub fn validate(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if let Err(e) = cfg.model.validate() {
        out.push(e.to_string());
    }
    if !(1..=3).contains(&cfg.dim) {
        out.push(format!("dimension must be 1, 2 or 3, got {}", cfg.dim));
    }
    if cfg.trials == 0 {
        out.push("trials must be ≥ 1".into());
    }
    if cfg.workers == Some(0) {
        out.push("workers must be ≥ 1".into());
    }
    match cfg.experiment {
        Experiment::Wegner => {
            let p = &cfg.wegner;
            check_scales(&mut out, "wegner", &p.scales, 2, 2);
            if p.etas.is_empty() || p.etas.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
                out.push("wegner: etas must be a non-empty list of positive windows".into());
            }
            if !p.energy.is_finite() {
                out.push("wegner: energy must be finite".into());
            }
        }
        Experiment::Ne => {
            check_interval(&mut out, "ne", cfg.ne.interval);
            check_scales(&mut out, "ne", &cfg.ne.scales, 2, 2);
        }
        Experiment::Msa => {
            let p = &cfg.msa;
            if let Err(e) = p.kind.validate() {
                out.push(e.to_string());
            }
            out.extend(admissibility(&cfg.msa_schedule()));
            if p.two_box && (p.grid_n < 2 || !(p.delta >= 0.0)) {
                out.push("msa: two-box check needs grid_n ≥ 2 and delta ≥ 0".into());
            }
        }
        Experiment::Bootstrap => {
            out.extend(cfg.bootstrap_config().validate());
            if !cfg.bootstrap.energy.is_finite() {
                out.push("bootstrap: energy must be finite".into());
            }
        }
        Experiment::Sli => check_scales(&mut out, "sli", &cfg.sli.scales, 6, 18),
        Experiment::Edi => check_scales(&mut out, "edi", &cfg.edi.scales, 6, 6),
        Experiment::Decay | Experiment::Correlator => {
            let (name, p) = if cfg.experiment == Experiment::Decay {
                ("decay", &cfg.decay)
            } else {
                ("correlator", &cfg.correlator)
            };
            check_interval(&mut out, name, p.interval);
            check_scales(&mut out, name, &[p.side], 2, 10);
        }
        Experiment::Dynamics => {
            let p = &cfg.dynamics;
            check_interval(&mut out, "dynamics", p.interval);
            check_scales(&mut out, "dynamics", &[p.side], 2, 4);
            if !(p.t_min > 0.0 && p.t_min < p.t_max && p.t_max.is_finite()) {
                out.push("dynamics: need 0 < t_min < t_max".into());
            }
            if p.points < 2 {
                out.push("dynamics: points must be ≥ 2".into());
            }
            if !(p.n >= 0.0) {
                out.push("dynamics: moment order n must be ≥ 0".into());
            }
        }
        Experiment::Lyapunov => {
            let p = &cfg.lyapunov;
            if cfg.dim != 1 {
                out.push("lyapunov: transfer matrices need dimension 1".into());
            }
            if p.energies.is_empty() {
                out.push("lyapunov: at least one energy is required".into());
            }
            if p.batches < 2 || p.sites < 100 * p.batches as u64 {
                out.push("lyapunov: need batches ≥ 2 and sites ≥ 100·batches".into());
            }
        }
        Experiment::Oracle => {
            if cfg.oracle.instances == 0 {
                out.push("oracle: instances must be ≥ 1".into());
            }
        }
    }
    out
}
