use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{BoundaryCondition, DisorderModel, FiniteVolumeOperator};
use crate::error::{Error, Result};
use crate::geometry::{sup_dist, BoxSpec, Site};
use crate::spectral::{self, SpectralData};
use crate::stats::{self, LineFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub center: Site,
    pub energy: f64,
    pub radii: Vec<f64>,
    /// `ln sup_{|x−x₀| ≥ r} |ψ(x)|`, the envelope whose slope is the limsup rate.
    pub log_norm: Vec<f64>,
    pub fitted_rate: f64,
    pub fit_quality: f64,
}

/// Decay envelope of `psi` around its max-modulus site, fitted by least
/// squares on the tail half of the radii.
pub fn decay_profile(bx: &BoxSpec, psi: &[f64], energy: f64) -> Result<DecayProfile> {
    if psi.len() != bx.len() {
        return Err(Error::domain("vector length does not match the box"));
    }
    let peak = psi
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::domain("empty vector"))?;
    let center = bx.site_at(peak);
    let mut shell_max: Vec<f64> = Vec::new();
    for (i, v) in psi.iter().enumerate() {
        let r = sup_dist(&bx.site_at(i), &center) as usize;
        if r >= shell_max.len() {
            shell_max.resize(r + 1, 0.0);
        }
        shell_max[r] = shell_max[r].max(v.abs());
    }
    if shell_max.len() < 5 {
        return Err(Error::domain("fewer than 5 radii fit in the box"));
    }
    // running maximum from the outside in
    let mut env = shell_max.clone();
    for r in (0..env.len() - 1).rev() {
        env[r] = env[r].max(env[r + 1]);
    }
    let radii: Vec<f64> = (0..env.len()).map(|r| r as f64).collect();
    let log_norm: Vec<f64> = env.iter().map(|v| v.ln()).collect();
    let start = radii.len() / 2;
    let (xs, ys): (Vec<f64>, Vec<f64>) = radii[start..]
        .iter()
        .zip(&log_norm[start..])
        .filter(|(_, y)| y.is_finite())
        .map(|(x, y)| (*x, *y))
        .unzip();
    let fit = stats::fit_line(&xs, &ys).unwrap_or(LineFit {
        intercept: f64::NAN,
        slope: f64::NAN,
        r_squared: f64::NAN,
    });
    Ok(DecayProfile {
        center,
        energy,
        radii,
        log_norm,
        fitted_rate: -fit.slope,
        fit_quality: fit.r_squared,
    })
}

/// Eigenvectors with eigenvalues in `interval`, with tails refined by
/// inverse iteration where the eigenvalue is isolated.
fn vectors_in(op: &FiniteVolumeOperator, data: &SpectralData, interval: (f64, f64)) -> Vec<(f64, Vec<f64>)> {
    let eigs = &data.eigenvalues;
    let mut out = Vec::new();
    for (j, &e) in eigs.iter().enumerate() {
        if e < interval.0 || e > interval.1 {
            continue;
        }
        let v = data.vector(j).expect("vectors");
        let gap = [j.checked_sub(1).map(|k| e - eigs[k]), eigs.get(j + 1).map(|n| n - e)]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
        if gap > 1e-8 * op.norm_bound().max(1.0) {
            out.push((e, spectral::refine_eigenvector(op, e, &v)));
        } else {
            out.push((e, v));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySummary {
    pub profiles: Vec<DecayProfile>,
    pub median_rate: f64,
}

/// Decay profiles of every eigenvector with eigenvalue in `interval`, over trials.
pub fn eigenfunction_decay(
    model: &DisorderModel,
    bx: &BoxSpec,
    interval: (f64, f64),
    trials: u64,
) -> Result<DecaySummary> {
    let count = if model.is_deterministic() { 1 } else { trials.max(1) };
    let per_trial = (0..count)
        .into_par_iter()
        .map(|t| {
            let op = FiniteVolumeOperator::restricted(model, t, bx, BoundaryCondition::Dirichlet);
            let data = spectral::spectrum(&op)?;
            vectors_in(&op, &data, interval)
                .into_iter()
                .map(|(e, v)| decay_profile(bx, &v, e))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let profiles: Vec<DecayProfile> = per_trial.into_iter().flatten().collect();
    let rates: Vec<f64> = profiles.iter().map(|p| p.fitted_rate).filter(|r| r.is_finite()).collect();
    Ok(DecaySummary {
        median_rate: stats::median(&rates).unwrap_or(f64::NAN),
        profiles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTrace {
    pub n: f64,
    pub times: Vec<f64>,
    /// `M_n(t) = ‖⟨x⟩^{n/2} E(I) e^{−itH} ψ₀‖²`.
    pub values: Vec<f64>,
    /// Time average of `M_n` over `[0, t]`.
    pub cesaro: Vec<f64>,
    pub max: f64,
    /// `M_n` at the grid time closest to `t_ref`.
    pub reference: f64,
    /// `max_{t ≥ t_ref} M_n(t) / M_n(t_ref)`.
    pub late_early_ratio: f64,
    /// Log-log slope of `M_n` over grid times in `[1, 100]`.
    pub loglog_slope: f64,
}

/// Per-eigenvector data needed for moments: `c_j = ⟨v_j, ψ₀⟩` and
/// `A_{jk} = Σ_x ⟨x⟩^n v_j(x) v_k(x)` restricted to eigenvalues in `I`.
struct MomentKernel {
    lambdas: Vec<f64>,
    coef: Vec<f64>,
    weighted: DMatrix<f64>,
}

impl MomentKernel {
    fn new(bx: &BoxSpec, data: &SpectralData, interval: (f64, f64), n: f64, psi0: &[f64]) -> Self {
        let v = data.eigenvectors.as_ref().expect("vectors");
        let idx: Vec<usize> = (0..data.eigenvalues.len())
            .filter(|&j| data.eigenvalues[j] >= interval.0 && data.eigenvalues[j] <= interval.1)
            .collect();
        let sub = DMatrix::from_fn(v.nrows(), idx.len(), |i, c| v[(i, idx[c])]);
        let center = bx.center();
        let w: Vec<f64> = (0..bx.len())
            .map(|i| {
                let s = bx.site_at(i);
                let r2: f64 = s.iter().zip(center).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
                (1.0 + r2).powf(n / 2.0)
            })
            .collect();
        let ws = DMatrix::from_fn(sub.nrows(), sub.ncols(), |i, c| w[i] * sub[(i, c)]);
        let weighted = sub.transpose() * ws;
        let coef = (0..idx.len())
            .map(|c| sub.column(c).iter().zip(psi0).map(|(a, b)| a * b).sum())
            .collect();
        MomentKernel {
            lambdas: idx.iter().map(|&j| data.eigenvalues[j]).collect(),
            coef,
            weighted,
        }
    }

    /// `Σ_{jk} c_j c_k A_{jk} f(λ_j − λ_k)`.
    fn contract(&self, f: impl Fn(f64) -> Complex64) -> f64 {
        let m = self.lambdas.len();
        let mut total = 0.0;
        for j in 0..m {
            let cj = self.coef[j];
            if cj == 0.0 {
                continue;
            }
            for k in 0..m {
                let a = self.weighted[(j, k)] * cj * self.coef[k];
                if a != 0.0 {
                    total += a * f(self.lambdas[j] - self.lambdas[k]).re;
                }
            }
        }
        total
    }

    fn at(&self, t: f64) -> f64 {
        self.contract(|d| Complex64::from_polar(1.0, -d * t))
    }

    fn cesaro(&self, t: f64) -> f64 {
        self.contract(|d| {
            let z = d * t;
            if z.abs() < 1e-12 {
                Complex64::new(1.0, 0.0)
            } else {
                (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -z)) / Complex64::new(0.0, z)
            }
        })
    }
}

fn trace_from(n: f64, times: &[f64], values: Vec<f64>, cesaro: Vec<f64>, t_ref: f64) -> MomentTrace {
    let r = times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t_ref).abs().total_cmp(&(b.1 - t_ref).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let reference = values.get(r).copied().unwrap_or(f64::NAN);
    let late = values[r..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&values)
        .filter(|(t, v)| **t >= 1.0 && **t <= 100.0 && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .unzip();
    MomentTrace {
        n,
        times: times.to_vec(),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        reference,
        late_early_ratio: late / reference,
        loglog_slope: stats::fit_line(&xs, &ys).map_or(f64::NAN, |f| f.slope),
        values,
        cesaro,
    }
}

/// Moment trace for one trial, starting from `ψ₀`.
pub fn dynamical_moment(
    op: &FiniteVolumeOperator,
    interval: (f64, f64),
    n: f64,
    psi0: &[f64],
    times: &[f64],
    t_ref: f64,
) -> Result<MomentTrace> {
    if psi0.len() != op.dim() {
        return Err(Error::domain("initial state length does not match the box"));
    }
    let data = spectral::spectrum(op)?;
    let k = MomentKernel::new(op.boxspec(), &data, interval, n, psi0);
    let values = times.iter().map(|&t| k.at(t)).collect();
    let cesaro = times.iter().map(|&t| k.cesaro(t)).collect();
    Ok(trace_from(n, times, values, cesaro, t_ref))
}

/// Trial-averaged moment trace started from `δ` at the box center.
pub fn moment_scan(
    model: &DisorderModel,
    bx: &BoxSpec,
    interval: (f64, f64),
    n: f64,
    times: &[f64],
    t_ref: f64,
    trials: u64,
) -> Result<MomentTrace> {
    let mut psi0 = vec![0.0; bx.len()];
    psi0[bx.index_of(bx.center()).expect("center")] = 1.0;
    let count = if model.is_deterministic() { 1 } else { trials.max(1) };
    let traces = (0..count)
        .into_par_iter()
        .map(|t| {
            let op = FiniteVolumeOperator::restricted(model, t, bx, BoundaryCondition::Dirichlet);
            let data = spectral::spectrum(&op)?;
            let k = MomentKernel::new(bx, &data, interval, n, &psi0);
            Ok((
                times.iter().map(|&t| k.at(t)).collect::<Vec<_>>(),
                times.iter().map(|&t| k.cesaro(t)).collect::<Vec<_>>(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let avg = |cesaro: bool| -> Vec<f64> {
        (0..times.len())
            .map(|i| {
                let total: f64 = traces.iter().map(|(v, c)| if cesaro { c[i] } else { v[i] }).sum();
                total / traces.len() as f64
            })
            .collect()
    };
    Ok(trace_from(n, times, avg(false), avg(true), t_ref))
}

/// `count` log-spaced times from `t0` to `t1`.
pub fn log_grid(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![t0];
    }
    let (a, b) = (t0.ln(), t1.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorTable {
    pub radii: Vec<f64>,
    /// Trial mean of `max_{|x−c| = r} Σ_{λ_j ∈ I} |v_j(x)| |v_j(c)|`.
    pub q: Vec<f64>,
    pub best_zeta: f64,
    /// `−slope` of `ln Q` against `r^ζ̂`.
    pub rate: f64,
    pub r_squared: f64,
}

/// Eigenfunction correlator between the box center and each shell.
pub fn correlator_decay(
    model: &DisorderModel,
    bx: &BoxSpec,
    interval: (f64, f64),
    trials: u64,
) -> Result<CorrelatorTable> {
    let c = bx.index_of(bx.center()).expect("center");
    let radius = bx.radius() as usize;
    let shells: Vec<Vec<usize>> = (0..=radius).map(|r| bx.shell_indices(r as i64)).collect();
    let count = if model.is_deterministic() { 1 } else { trials.max(1) };
    let per_trial = (0..count)
        .into_par_iter()
        .map(|t| {
            let op = FiniteVolumeOperator::restricted(model, t, bx, BoundaryCondition::Dirichlet);
            let data = spectral::spectrum(&op)?;
            let mut corr = vec![0.0; bx.len()];
            for (_, v) in vectors_in(&op, &data, interval) {
                let vc = v[c].abs();
                for (x, val) in corr.iter_mut().zip(&v) {
                    *x += val.abs() * vc;
                }
            }
            Ok(shells
                .iter()
                .map(|s| s.iter().map(|&i| corr[i]).fold(0.0, f64::max))
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let q: Vec<f64> = (0..=radius)
        .map(|r| per_trial.iter().map(|row| row[r]).sum::<f64>() / per_trial.len() as f64)
        .collect();
    let radii: Vec<f64> = (0..=radius).map(|r| r as f64).collect();
    let (best_zeta, fit) = fit_stretched(&radii, &q);
    Ok(CorrelatorTable {
        radii,
        q,
        best_zeta,
        rate: -fit.slope,
        r_squared: fit.r_squared,
    })
}

/// Best `ζ ∈ {0.10, 0.15, …, 2.00}` for a line fit of `ln Q` against `r^ζ`.
pub fn fit_stretched(radii: &[f64], q: &[f64]) -> (f64, LineFit) {
    let (rs, ys): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(q)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(r, v)| (*r, v.ln()))
        .unzip();
    let mut best = (
        f64::NAN,
        LineFit {
            intercept: f64::NAN,
            slope: f64::NAN,
            r_squared: f64::NEG_INFINITY,
        },
    );
    for k in 0..=38 {
        let zeta = 0.1 + 0.05 * k as f64;
        let xs: Vec<f64> = rs.iter().map(|r| r.powf(zeta)).collect();
        if let Some(f) = stats::fit_line(&xs, &ys) {
            if f.r_squared > best.1.r_squared {
                best = (zeta, f);
            }
        }
    }
    best
}
