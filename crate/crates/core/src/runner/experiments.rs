use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Experiment, ExperimentConfig};
use crate::diagnostics;
use crate::error::Result;
use crate::geometry::BoxSpec;
use crate::msa::{
    self, build_schedule, estimate_singular_prob, estimate_two_box_fail, CertifyParams, RegularityParams, TwoBoxParams,
};
use crate::spectral::oracle;
use crate::stats::MonteCarloEstimate;

/// Rows for `data.csv`.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub struct Outputs {
    pub summary: Value,
    pub table: Table,
    /// Pass/fail for experiments that are checks rather than measurements.
    pub passed: Option<bool>,
}

fn f(v: f64) -> String {
    if v != 0.0 && v.is_finite() && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn est_cells(e: &MonteCarloEstimate) -> Vec<String> {
    vec![e.successes.to_string(), e.trials.to_string(), f(e.p_hat), f(e.ci95.0), f(e.ci95.1)]
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn dispatch(cfg: &ExperimentConfig) -> Result<Outputs> {
    let model = &cfg.model;
    let dim = cfg.dim;
    let trials = cfg.trials;
    match cfg.experiment {
        Experiment::Wegner => {
            let p = &cfg.wegner;
            let curve = diagnostics::wegner_scan(model, dim, p.energy, &p.etas, &p.scales, trials)?;
            let mut t = Table::new(&["scale", "eta", "hits", "trials", "p_hat", "ci_lo", "ci_hi"]);
            for (i, &l) in curve.scales.iter().enumerate() {
                for (j, &eta) in curve.etas.iter().enumerate() {
                    let mut row = vec![l.to_string(), f(eta)];
                    row.extend(est_cells(&curve.p_hat[i][j]));
                    t.push(row);
                }
            }
            Ok(Outputs {
                summary: json!({
                    "energy": curve.energy,
                    "eta_slope": curve.eta_slope,
                    "l_exponent": curve.l_exponent,
                }),
                table: t,
                passed: None,
            })
        }
        Experiment::Ne => {
            let table = diagnostics::ne_scan(model, dim, cfg.ne.interval, &cfg.ne.scales, trials)?;
            let mut t = Table::new(&["scale", "mean_count", "ratio"]);
            for r in &table.rows {
                t.push(vec![r.scale.to_string(), f(r.mean_count), f(r.ratio)]);
            }
            Ok(Outputs {
                summary: json!({ "interval": table.interval, "variation": table.variation }),
                table: t,
                passed: None,
            })
        }
        Experiment::Msa => {
            let p = &cfg.msa;
            let schedule = build_schedule(&cfg.msa_schedule())?;
            let mut t = Table::new(&["scale", "quantity", "bad", "trials", "p_hat", "ci_lo", "ci_hi"]);
            for &l in &schedule.scales {
                let single = estimate_singular_prob(
                    model,
                    dim,
                    l,
                    &RegularityParams {
                        kind: p.kind,
                        energy: p.energy,
                    },
                    trials,
                )?;
                let mut row = vec![l.to_string(), "single".into()];
                row.extend(est_cells(&single));
                t.push(row);
                if p.two_box {
                    let rho = schedule.params.rho;
                    let mut second = vec![0i64; dim];
                    second[0] = (l + rho + 2) as i64;
                    let est = estimate_two_box_fail(
                        model,
                        &TwoBoxParams {
                            side: l,
                            first: vec![0; dim],
                            second,
                            rho,
                            certify: CertifyParams {
                                mass: p.kind.equivalent_mass(l),
                                interval: (p.energy - p.delta, p.energy + p.delta),
                                grid_n: p.grid_n,
                                s: schedule.params.s,
                            },
                        },
                        trials,
                    )?;
                    for (name, e) in [("two_box_first", est.first), ("two_box_second", est.second), ("two_box_both", est.both)] {
                        let mut row = vec![l.to_string(), name.into()];
                        row.extend(est_cells(&e));
                        t.push(row);
                    }
                }
            }
            Ok(Outputs {
                summary: json!({ "scales": schedule.scales, "kind": p.kind, "energy": p.energy }),
                table: t,
                passed: None,
            })
        }
        Experiment::Bootstrap => {
            let report = msa::run_bootstrap(model, cfg.bootstrap.energy, &cfg.bootstrap_config())?;
            let mut t = Table::new(&[
                "stage", "scale", "quantity", "bad", "trials", "p_hat", "ci_lo", "ci_hi", "bound", "outcome",
            ]);
            for c in report.checks() {
                let mut row = vec![c.stage.to_string(), c.scale.to_string(), c.quantity.clone()];
                row.extend(est_cells(&c.bad));
                row.push(f(c.bad_bound));
                row.push(c.outcome.to_string());
                t.push(row);
            }
            let passed = report.all_pass();
            let mut summary = to_value(&report)?;
            summary["all_pass"] = json!(passed);
            Ok(Outputs {
                summary,
                table: t,
                passed: Some(passed),
            })
        }
        Experiment::Sli | Experiment::Edi => {
            let sli = cfg.experiment == Experiment::Sli;
            let p = if sli { &cfg.sli } else { &cfg.edi };
            let mut t = Table::new(&["scale", "max", "median", "samples", "skipped"]);
            let mut maxima = Vec::new();
            for &l in &p.scales {
                let s = if sli {
                    diagnostics::sli_scan(model, dim, l, p.energy, trials)?
                } else {
                    diagnostics::edi_scan(model, dim, l, p.energy, trials)?
                };
                maxima.push(s.max);
                t.push(vec![l.to_string(), f(s.max), f(s.median), s.samples.to_string(), s.skipped.to_string()]);
            }
            let hi = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(Outputs {
                summary: json!({ "energy": p.energy, "max_ratio_across_scales": hi / lo }),
                table: t,
                passed: None,
            })
        }
        Experiment::Decay => {
            let p = &cfg.decay;
            let bx = BoxSpec::centered(dim, p.side)?;
            let s = diagnostics::eigenfunction_decay(model, &bx, p.interval, trials)?;
            let mut t = Table::new(&["energy", "center", "fitted_rate", "fit_quality"]);
            for pr in &s.profiles {
                let center: Vec<String> = pr.center.iter().map(|c| c.to_string()).collect();
                t.push(vec![f(pr.energy), center.join(" "), f(pr.fitted_rate), f(pr.fit_quality)]);
            }
            Ok(Outputs {
                summary: json!({ "median_rate": s.median_rate, "profiles": s.profiles.len() }),
                table: t,
                passed: None,
            })
        }
        Experiment::Dynamics => {
            let p = &cfg.dynamics;
            let bx = BoxSpec::centered(dim, p.side)?;
            let times = diagnostics::log_grid(p.t_min, p.t_max, p.points);
            let tr = diagnostics::moment_scan(model, &bx, p.interval, p.n, &times, p.t_ref, trials)?;
            let mut t = Table::new(&["t", "moment", "cesaro"]);
            for i in 0..tr.times.len() {
                t.push(vec![f(tr.times[i]), f(tr.values[i]), f(tr.cesaro[i])]);
            }
            Ok(Outputs {
                summary: json!({
                    "n": tr.n,
                    "max": tr.max,
                    "reference": tr.reference,
                    "late_early_ratio": tr.late_early_ratio,
                    "loglog_slope": tr.loglog_slope,
                }),
                table: t,
                passed: None,
            })
        }
        Experiment::Correlator => {
            let p = &cfg.correlator;
            let bx = BoxSpec::centered(dim, p.side)?;
            let c = diagnostics::correlator_decay(model, &bx, p.interval, trials)?;
            let mut t = Table::new(&["r", "q"]);
            for (r, q) in c.radii.iter().zip(&c.q) {
                t.push(vec![f(*r), f(*q)]);
            }
            Ok(Outputs {
                summary: json!({ "best_zeta": c.best_zeta, "rate": c.rate, "r_squared": c.r_squared }),
                table: t,
                passed: None,
            })
        }
        Experiment::Lyapunov => {
            let p = &cfg.lyapunov;
            let mut t = Table::new(&["energy", "gamma", "ci_lo", "ci_hi"]);
            let mut all = Vec::new();
            for &e in &p.energies {
                let est = diagnostics::lyapunov_1d(model, e, p.sites, p.batches)?;
                t.push(vec![f(e), f(est.gamma), f(est.ci95.0), f(est.ci95.1)]);
                all.push(est);
            }
            Ok(Outputs {
                summary: json!({ "estimates": all }),
                table: t,
                passed: None,
            })
        }
        Experiment::Oracle => {
            let checks = oracle::run_suite(model.master_seed, cfg.oracle.instances)?;
            let mut t = Table::new(&["check", "instances", "worst", "tolerance", "passed"]);
            for c in &checks {
                t.push(vec![
                    c.name.clone(),
                    c.instances.to_string(),
                    f(c.worst),
                    f(c.tolerance),
                    c.passed.to_string(),
                ]);
            }
            let passed = checks.iter().all(|c| c.passed);
            Ok(Outputs {
                summary: json!({ "checks": checks, "all_pass": passed }),
                table: t,
                passed: Some(passed),
            })
        }
    }
}
