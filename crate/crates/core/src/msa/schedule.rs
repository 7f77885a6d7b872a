use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::snap_6n;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScaleMode {
    /// `L_{k+1} = Y·L_k`, `Y` odd and ≥ 11.
    Geometric { y: u64 },
    /// `L_{k+1} = [L_k^α]_{6ℕ}`.
    Power { alpha: f64 },
}

/// Exponents of the induction. Defaults are the d = 1, b = 1 set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsaParams {
    pub theta: f64,
    pub theta_prime: f64,
    pub p: f64,
    pub p_prime: f64,
    pub s: f64,
    /// Wegner volume exponent, 1 or 2.
    pub b: u32,
    pub d: u32,
    pub rho: u64,
    pub zeta0: f64,
    pub zeta1: f64,
    pub zeta2: f64,
}

impl Default for MsaParams {
    fn default() -> Self {
        MsaParams {
            theta: 4.0,
            theta_prime: 3.5,
            p: 1.0,
            p_prime: 1.5,
            s: 2.5,
            b: 1,
            d: 1,
            rho: 0,
            zeta0: 0.6,
            zeta1: 0.45,
            zeta2: 0.35,
        }
    }
}

impl MsaParams {
    fn bd(&self) -> f64 {
        (self.b * self.d) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub mode: ScaleMode,
    pub l0: u64,
    /// Largest scale kept in the list.
    pub cap: u64,
    pub params: MsaParams,
    /// Check the admissibility inequalities and require `L_0 ∈ 6ℕ`.
    pub msa_grade: bool,
    /// Also require the interval-stage condition `θ > 2p + (b+1)d`.
    pub interval_stage: bool,
    /// Also require the sub-exponential conditions.
    pub subexp_stage: bool,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            mode: ScaleMode::Power { alpha: 1.25 },
            l0: 12,
            cap: 300,
            params: MsaParams::default(),
            msa_grade: true,
            interval_stage: false,
            subexp_stage: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    pub mode: ScaleMode,
    pub l0: u64,
    pub scales: Vec<u64>,
    pub params: MsaParams,
}

/// Every violated admissibility condition, each naming its inequality.
/// Empty iff the configuration is admissible.
pub fn admissibility(cfg: &ScheduleConfig) -> Vec<String> {
    let q = &cfg.params;
    let mut out = Vec::new();
    let mut need = |ok: bool, name: &str, detail: String| {
        if !ok {
            out.push(format!("violates \"{name}\": {detail}"));
        }
    };
    need(q.d >= 1, "d ≥ 1", format!("d = {}", q.d));
    need(q.b == 1 || q.b == 2, "b ∈ {1, 2}", format!("b = {}", q.b));
    need(q.p > 0.0 && q.p < q.p_prime, "0 < p < p′", format!("p = {}, p′ = {}", q.p, q.p_prime));
    need(
        q.p_prime < q.theta - q.bd(),
        "p′ < θ − bd",
        format!("p′ = {}, θ − bd = {}", q.p_prime, q.theta - q.bd()),
    );
    if cfg.msa_grade {
        need(cfg.l0 % 6 == 0 && cfg.l0 > 0, "L₀ ∈ 6ℕ", format!("L₀ = {}", cfg.l0));
    }
    match cfg.mode {
        ScaleMode::Power { alpha } => {
            let d = q.d as f64;
            let a1 = (2.0 * q.p + 2.0 * d) / (q.p + 2.0 * d);
            let a2 = q.theta / (q.p + q.bd());
            need(
                alpha > 1.0 && alpha < a1.min(a2),
                "1 < α < min{(2p+2d)/(p+2d), θ/(p+bd)}",
                format!("α = {alpha}, bound = {}", a1.min(a2)),
            );
            need(q.theta / 2.0 < q.theta_prime, "θ/2 < θ′", format!("θ = {}, θ′ = {}", q.theta, q.theta_prime));
            need(q.p + q.bd() < q.s, "p + bd < s", format!("p + bd = {}, s = {}", q.p + q.bd(), q.s));
            need(
                alpha * q.s < q.theta_prime,
                "αs < θ′",
                format!("αs = {}, θ′ = {}", alpha * q.s, q.theta_prime),
            );
            need(q.theta_prime < q.theta, "θ′ < θ", format!("θ′ = {}, θ = {}", q.theta_prime, q.theta));
            if cfg.subexp_stage {
                need(
                    0.0 < q.zeta2 && q.zeta2 < q.zeta1 && q.zeta1 < q.zeta0 && q.zeta0 < 1.0,
                    "0 < ζ₂ < ζ₁ < ζ₀ < 1",
                    format!("ζ = ({}, {}, {})", q.zeta0, q.zeta1, q.zeta2),
                );
                need(
                    alpha < q.zeta0 / q.zeta1,
                    "1 < α < ζ₀/ζ₁",
                    format!("α = {alpha}, ζ₀/ζ₁ = {}", q.zeta0 / q.zeta1),
                );
            }
        }
        ScaleMode::Geometric { y } => {
            need(y % 2 == 1 && y >= 11, "Y odd, Y ≥ 11", format!("Y = {y}"));
        }
    }
    if cfg.interval_stage {
        let rhs = 2.0 * q.p + ((q.b + 1) * q.d) as f64;
        need(q.theta > rhs, "θ > 2p + (b+1)d", format!("θ = {}, 2p + (b+1)d = {rhs}", q.theta));
    }
    out
}

pub fn build_schedule(cfg: &ScheduleConfig) -> Result<ScaleSchedule> {
    if cfg.msa_grade {
        let bad = admissibility(cfg);
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
    }
    if cfg.l0 < 2 || cfg.l0 % 2 == 1 {
        return Err(Error::domain(format!("L₀ = {} is not a positive even side", cfg.l0)));
    }
    if cfg.cap < cfg.l0 {
        return Err(Error::domain(format!("cap {} is below L₀ = {}", cfg.cap, cfg.l0)));
    }
    let mut scales = vec![cfg.l0];
    loop {
        let last = *scales.last().expect("nonempty");
        let next = match cfg.mode {
            ScaleMode::Geometric { y } => last.checked_mul(y),
            ScaleMode::Power { alpha } => {
                let raw = (last as f64).powf(alpha);
                if raw > cfg.cap as f64 {
                    None
                } else {
                    Some(snap_6n(raw)?)
                }
            }
        };
        match next {
            Some(n) if n <= cfg.cap => {
                if n <= last {
                    return Err(Error::domain(format!("schedule stalls at L = {last}")));
                }
                scales.push(n);
            }
            _ => break,
        }
    }
    Ok(ScaleSchedule {
        mode: cfg.mode,
        l0: cfg.l0,
        scales,
        params: cfg.params,
    })
}
