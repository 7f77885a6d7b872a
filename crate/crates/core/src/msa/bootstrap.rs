use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::estimate::{estimate_two_box_fail, mass_from_norm, sample_norms, CertifyParams, TwoBoxParams};
use super::schedule::{admissibility, build_schedule, MsaParams, ScaleMode, ScheduleConfig};
use super::{subexp_to_regular_mass, suitable_to_regular_mass, verdict_for, RegularityKind};
use crate::ensemble::DisorderModel;
use crate::error::{Error, Result};
use crate::stats::{Comparison, MonteCarloEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub dim: usize,
    pub l0: u64,
    pub cap: u64,
    /// Power-mode exponent for stages 2–4.
    pub alpha: f64,
    /// Geometric factor for stage 1.
    pub y: u64,
    pub params: MsaParams,
    pub trials: u64,
    /// Number of stages to run, 1 to 4.
    pub stages: u8,
    /// Run the stage-2 two-box interval check (needs `θ > 2p + (b+1)d`).
    pub interval_stage: bool,
    pub grid_n: usize,
    /// Half-width of the energy window; `None` uses the resolvent-perturbation window.
    pub delta: Option<f64>,
    /// Keep going after a failed starting hypothesis (diagnostic runs).
    pub continue_after_entry_failure: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            dim: 1,
            l0: 12,
            cap: 300,
            alpha: 1.25,
            y: 11,
            params: MsaParams::default(),
            trials: 2000,
            stages: 4,
            interval_stage: false,
            grid_n: 3,
            delta: None,
            continue_after_entry_failure: false,
        }
    }
}

impl BootstrapConfig {
    fn power(&self) -> ScheduleConfig {
        ScheduleConfig {
            mode: ScaleMode::Power { alpha: self.alpha },
            l0: self.l0,
            cap: self.cap,
            params: self.params,
            msa_grade: true,
            interval_stage: self.interval_stage,
            subexp_stage: self.stages >= 3,
        }
    }

    fn geometric(&self) -> ScheduleConfig {
        ScheduleConfig {
            mode: ScaleMode::Geometric { y: self.y },
            interval_stage: false,
            subexp_stage: false,
            ..self.power()
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = admissibility(&self.power());
        out.extend(
            admissibility(&self.geometric())
                .into_iter()
                .filter(|m| m.contains("Y odd")),
        );
        if self.dim as u32 != self.params.d {
            out.push(format!("dimension {} does not match params.d = {}", self.dim, self.params.d));
        }
        if self.trials == 0 {
            out.push("trials must be ≥ 1".into());
        }
        if !(1..=4).contains(&self.stages) {
            out.push(format!("stages must be 1 to 4, got {}", self.stages));
        }
        if self.grid_n < 2 {
            out.push("grid_n must be ≥ 2".into());
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0) {
                out.push(format!("delta must be ≥ 0, got {d}"));
            }
        }
        if self.cap < self.l0 {
            out.push(format!("cap {} is below L₀ = {}", self.cap, self.l0));
        }
        out
    }

    /// `m₀ = 2θ ln L₀ / L₀`.
    pub fn m0(&self) -> f64 {
        suitable_to_regular_mass(self.params.theta, self.l0)
    }

    /// `m₀′ = 2θ′ ln L₀ / L₀`.
    pub fn m0_prime(&self) -> f64 {
        suitable_to_regular_mass(self.params.theta_prime, self.l0)
    }

    /// `δ = (e^{−m₀′L₀/2} − e^{−m₀L₀/2}) / (2 L₀^{2s})` unless set explicitly.
    pub fn window(&self) -> f64 {
        self.delta.unwrap_or_else(|| {
            let l = self.l0 as f64;
            ((-self.m0_prime() * l / 2.0).exp() - (-self.m0() * l / 2.0).exp()) / (2.0 * l.powf(2.0 * self.params.s))
        })
    }
}

/// One probability comparison: the bad-event estimate against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCheck {
    pub stage: u8,
    pub scale: u64,
    pub quantity: String,
    pub bad: MonteCarloEstimate,
    /// The good event must have probability above `1 − bad_bound`.
    pub bad_bound: f64,
    pub outcome: Comparison,
}

/// Descendant masses and the running-mass budget `Σ(m_k − m_{k+1}) ≤ m₀′ − m₀/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassLedger {
    pub m0: f64,
    pub m0_prime: f64,
    /// `(L_k, m_k)`, starting with `(L₀, m₀′)`.
    pub masses: Vec<(u64, f64)>,
    pub spent: f64,
    pub budget: f64,
    pub outcome: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: u8,
    pub name: String,
    pub checks: Vec<ScaleCheck>,
    pub ledger: Option<MassLedger>,
    pub outcome: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub energy: f64,
    pub master_seed: u64,
    pub config: BootstrapConfig,
    pub geometric_scales: Vec<u64>,
    pub power_scales: Vec<u64>,
    pub delta: f64,
    pub entry: ScaleCheck,
    pub halted: bool,
    pub stages: Vec<StageReport>,
}

fn worst(items: impl IntoIterator<Item = Comparison>) -> Comparison {
    let mut out = Comparison::Pass;
    for c in items {
        match c {
            Comparison::Fail => return Comparison::Fail,
            Comparison::Inconclusive => out = Comparison::Inconclusive,
            Comparison::Pass => {}
        }
    }
    out
}

impl BootstrapReport {
    pub fn all_pass(&self) -> bool {
        !self.halted
            && self.entry.outcome == Comparison::Pass
            && self.stages.iter().all(|s| s.outcome == Comparison::Pass)
    }

    /// Every check, entry first.
    pub fn checks(&self) -> impl Iterator<Item = &ScaleCheck> {
        std::iter::once(&self.entry).chain(self.stages.iter().flat_map(|s| s.checks.iter()))
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "E0 = {}  seed = {}  L0 = {}  delta = {:.3e}{}",
            self.energy,
            self.master_seed,
            self.config.l0,
            self.delta,
            if self.halted { "  (halted)" } else { "" }
        );
        let _ = writeln!(
            s,
            "{:<6}{:>6}  {:<34}{:>10}{:>26}{:>12}  {}",
            "stage", "L", "quantity", "p_bad", "ci95", "bound", "outcome"
        );
        for c in self.checks() {
            let _ = writeln!(
                s,
                "{:<6}{:>6}  {:<34}{:>10.4e}{:>26}{:>12.4e}  {}",
                c.stage,
                c.scale,
                c.quantity,
                c.bad.p_hat,
                format!("[{:.3e}, {:.3e}]", c.bad.ci95.0, c.bad.ci95.1),
                c.bad_bound,
                c.outcome
            );
        }
        for st in &self.stages {
            if let Some(l) = &st.ledger {
                let _ = writeln!(
                    s,
                    "mass ledger: spent {:.4} of budget {:.4} ({}); masses {:?}",
                    l.spent, l.budget, l.outcome, l.masses
                );
            }
        }
        s
    }
}

struct Runner<'a> {
    model: &'a DisorderModel,
    cfg: &'a BootstrapConfig,
    energy: f64,
    norms: BTreeMap<u64, Vec<(Option<f64>, f64)>>,
}

impl Runner<'_> {
    fn norms(&mut self, side: u64) -> Result<&Vec<(Option<f64>, f64)>> {
        if !self.norms.contains_key(&side) {
            let v = sample_norms(self.model, self.cfg.dim, side, self.energy, self.cfg.trials)?;
            self.norms.insert(side, v);
        }
        Ok(&self.norms[&side])
    }

    fn estimate(&self, bad: u64) -> Result<MonteCarloEstimate> {
        if self.model.is_deterministic() {
            MonteCarloEstimate::exact(bad, self.cfg.trials)
        } else {
            MonteCarloEstimate::from_counts(bad, self.cfg.trials)
        }
    }

    fn single(&mut self, stage: u8, side: u64, kind: RegularityKind, quantity: String, bad_bound: f64) -> Result<ScaleCheck> {
        let bad = self
            .norms(side)?
            .iter()
            .filter(|(n, d)| !verdict_for(*n, *d, kind, side).is_regular())
            .count() as u64;
        let bad = self.estimate(bad)?;
        Ok(ScaleCheck {
            stage,
            scale: side,
            quantity,
            bad,
            bad_bound,
            outcome: Comparison::bad_below(&bad, bad_bound),
        })
    }

    fn two_box(&self, stage: u8, side: u64, mass: f64, quantity: String, bad_bound: f64) -> Result<ScaleCheck> {
        let dim = self.cfg.dim;
        let mut second = vec![0i64; dim];
        second[0] = (side + self.cfg.params.rho + 2) as i64;
        let delta = self.cfg.window();
        let params = TwoBoxParams {
            side,
            first: vec![0; dim],
            second,
            rho: self.cfg.params.rho,
            certify: CertifyParams {
                mass,
                interval: (self.energy - delta, self.energy + delta),
                grid_n: self.cfg.grid_n,
                s: self.cfg.params.s,
            },
        };
        let bad = estimate_two_box_fail(self.model, &params, self.cfg.trials)?.both;
        Ok(ScaleCheck {
            stage,
            scale: side,
            quantity,
            bad,
            bad_bound,
            outcome: Comparison::bad_below(&bad, bad_bound),
        })
    }

    /// Largest `m` with `p̂_L(m) < L^{−p}`.
    fn descendant_mass(&mut self, side: u64) -> Result<f64> {
        let q = (side as f64).powf(-self.cfg.params.p);
        let mut masses: Vec<f64> = self
            .norms(side)?
            .iter()
            .map(|(n, _)| n.map_or(f64::NEG_INFINITY, |v| mass_from_norm(v, side)))
            .collect();
        masses.sort_by(f64::total_cmp);
        let allowed = ((q * masses.len() as f64).ceil() as usize).saturating_sub(1);
        Ok(masses[allowed.min(masses.len() - 1)])
    }
}

/// Runs the four-stage bootstrap at `energy`, reporting every threshold
/// comparison. A failed starting hypothesis at `L₀` halts the run unless
/// `continue_after_entry_failure` is set.
pub fn run_bootstrap(model: &DisorderModel, energy: f64, cfg: &BootstrapConfig) -> Result<BootstrapReport> {
    let diags = cfg.validate();
    if !diags.is_empty() {
        return Err(Error::Validation(diags));
    }
    model.validate()?;
    let geometric = build_schedule(&cfg.geometric())?.scales;
    let power = build_schedule(&cfg.power())?.scales;
    let q = cfg.params;
    let d = cfg.dim as i32;
    let l0 = cfg.l0;
    let mut r = Runner {
        model,
        cfg,
        energy,
        norms: BTreeMap::new(),
    };

    let suitable = RegularityKind::Suitable { theta: q.theta };
    let entry = r.single(
        0,
        l0,
        suitable,
        format!("θ-suitable (entry, 841^-{d})"),
        841f64.powi(-d),
    )?;
    let y_bound = ((3 * cfg.y - 4) as f64).powi(-2 * d);
    let stage1_start = r.single(1, l0, suitable, "θ-suitable (3Y-4)^-2d".into(), y_bound)?;
    let halted = (entry.outcome == Comparison::Fail || stage1_start.outcome == Comparison::Fail)
        && !cfg.continue_after_entry_failure;

    let mut stages = Vec::new();
    let mut stage1 = vec![stage1_start];
    if !halted {
        for &side in geometric.iter().skip(1) {
            stage1.push(r.single(1, side, suitable, "θ-suitable L^-p".into(), (side as f64).powf(-q.p))?);
        }
    }
    stages.push(StageReport {
        stage: 1,
        name: "geometric scales, θ-suitability".into(),
        outcome: worst(stage1.iter().map(|c| c.outcome)),
        checks: stage1,
        ledger: None,
    });

    if !halted && cfg.stages >= 2 {
        let m0 = cfg.m0();
        let mut checks = vec![r.single(
            2,
            l0,
            RegularityKind::Regular { mass: m0 },
            "m0-regular L0^-p'".into(),
            (l0 as f64).powf(-q.p_prime),
        )?];
        let half = RegularityKind::Regular { mass: m0 / 2.0 };
        let mut masses = vec![(l0, cfg.m0_prime())];
        for &side in &power {
            let bound = (side as f64).powf(-q.p);
            checks.push(r.single(2, side, half, "m0/2-regular L^-p".into(), bound)?);
            if side != l0 {
                masses.push((side, r.descendant_mass(side)?));
            }
            if cfg.interval_stage {
                checks.push(r.two_box(2, side, m0 / 2.0, "two-box m0/2 L^-2p".into(), bound * bound)?);
            }
        }
        let spent: f64 = masses.windows(2).map(|w| w[0].1 - w[1].1).sum();
        let budget = cfg.m0_prime() - m0 / 2.0;
        let ledger = MassLedger {
            m0,
            m0_prime: cfg.m0_prime(),
            masses,
            spent,
            budget,
            outcome: Comparison::from_bool(spent <= budget),
        };
        stages.push(StageReport {
            stage: 2,
            name: "power scales, m0/2-regularity".into(),
            outcome: worst(checks.iter().map(|c| c.outcome).chain([ledger.outcome])),
            checks,
            ledger: Some(ledger),
        });
    }

    if !halted && cfg.stages >= 3 {
        let kind = RegularityKind::SubexpSuitable { zeta: q.zeta0 };
        let mut checks = vec![r.single(3, l0, kind, "ζ0-subexp-suitable (3Y-4)^-2d".into(), y_bound)?];
        for &side in power.iter().skip(1) {
            let bound = (-(side as f64).powf(q.zeta1)).exp();
            checks.push(r.single(3, side, kind, "ζ0-subexp-suitable e^-L^ζ1".into(), bound)?);
        }
        stages.push(StageReport {
            stage: 3,
            name: "sub-exponential suitability".into(),
            outcome: worst(checks.iter().map(|c| c.outcome)),
            checks,
            ledger: None,
        });
    }

    if !halted && cfg.stages >= 4 {
        let m0 = subexp_to_regular_mass(q.zeta0, l0);
        let mut checks = vec![r.single(
            4,
            l0,
            RegularityKind::Regular { mass: m0 },
            "2L0^(ζ0-1)-regular e^-L0^ζ1".into(),
            (-(l0 as f64).powf(q.zeta1)).exp(),
        )?];
        for &side in &power {
            let bound = (-(side as f64).powf(q.zeta2)).exp();
            checks.push(r.two_box(4, side, m0 / 2.0, "two-box m0/2 e^-L^ζ2".into(), bound)?);
        }
        stages.push(StageReport {
            stage: 4,
            name: "two-box sub-exponential".into(),
            outcome: worst(checks.iter().map(|c| c.outcome)),
            checks,
            ledger: None,
        });
    }

    Ok(BootstrapReport {
        energy,
        master_seed: model.master_seed,
        config: *cfg,
        geometric_scales: geometric,
        power_scales: power,
        delta: cfg.window(),
        entry,
        halted,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Distribution;
    use approx::assert_relative_eq;

    #[test]
    fn entry_and_stage_thresholds() {
        assert_relative_eq!(1.0 - 841f64.powi(-1), 0.998811, epsilon = 1e-6);
        assert_relative_eq!(1.0 - ((3 * 11 - 4) as f64).powi(-2), 0.998811, epsilon = 1e-6);
    }

    #[test]
    fn free_model_passes_everything() {
        let model = DisorderModel::new(0.0, Distribution::UniformSymmetric, 1).unwrap();
        let cfg = BootstrapConfig {
            l0: 60,
            trials: 100,
            ..Default::default()
        };
        let rep = run_bootstrap(&model, -1.0, &cfg).unwrap();
        assert!(!rep.halted);
        assert_eq!(rep.stages.len(), 4);
        for c in rep.checks() {
            assert_eq!(c.bad.p_hat, 0.0, "{c:?}");
        }
        assert!(rep.all_pass(), "{}", rep.to_table());
    }

    #[test]
    fn halts_on_failed_entry() {
        // at L0 = 12 the free box at E = −1 is far from 12^-4-suitable
        let model = DisorderModel::new(0.0, Distribution::UniformSymmetric, 1).unwrap();
        let rep = run_bootstrap(&model, -1.0, &BootstrapConfig::default()).unwrap();
        assert_eq!(rep.entry.outcome, Comparison::Fail);
        assert!(rep.halted);
        assert_eq!(rep.stages.len(), 1);
    }

    #[test]
    fn rejects_inadmissible() {
        let model = DisorderModel::new(8.0, Distribution::UniformSymmetric, 1).unwrap();
        let cfg = BootstrapConfig {
            alpha: 1.5,
            ..Default::default()
        };
        assert!(matches!(run_bootstrap(&model, 0.0, &cfg), Err(Error::Validation(_))));
        let cfg = BootstrapConfig {
            interval_stage: true,
            ..Default::default()
        };
        match run_bootstrap(&model, 0.0, &cfg) {
            Err(Error::Validation(v)) => assert!(v.iter().any(|m| m.contains("θ > 2p + (b+1)d"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn window_formula() {
        let cfg = BootstrapConfig::default();
        let l: f64 = 12.0;
        let want = (l.powf(-3.5) - l.powf(-4.0)) / (2.0 * l.powi(5));
        assert_relative_eq!(cfg.window(), want, max_relative = 1e-10);
    }
}
