use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{belt_core_norm, verdict_for, RegularityKind, RegularityParams};
use crate::ensemble::{BoundaryCondition, DisorderModel, FiniteVolumeOperator};
use crate::error::{Error, Result};
use crate::geometry::{sup_dist, BoxSpec, Site};
use crate::spectral::{self, ShiftedSolver};
use crate::stats::{self, MonteCarloEstimate};

fn centered_op(model: &DisorderModel, dim: usize, side: u64, trial: u64) -> Result<FiniteVolumeOperator> {
    let bx = BoxSpec::msa_grade(vec![0; dim], side)?;
    Ok(FiniteVolumeOperator::restricted(model, trial, &bx, BoundaryCondition::Dirichlet))
}

/// Runs `f` for trials `0..trials` in parallel, in trial order. A
/// deterministic model is evaluated once and the result repeated.
fn per_trial<T, F>(model: &DisorderModel, trials: u64, f: F) -> Result<Vec<T>>
where
    T: Clone + Send,
    F: Fn(u64) -> Result<T> + Send + Sync,
{
    if trials == 0 {
        return Err(Error::domain("trials must be ≥ 1"));
    }
    if model.is_deterministic() {
        let one = f(0)?;
        return Ok(vec![one; trials as usize]);
    }
    (0..trials).into_par_iter().map(f).collect()
}

fn estimate(model: &DisorderModel, bad: u64, trials: u64) -> Result<MonteCarloEstimate> {
    if model.is_deterministic() {
        MonteCarloEstimate::exact(bad, trials)
    } else {
        MonteCarloEstimate::from_counts(bad, trials)
    }
}

/// Per-trial `(belt-to-core norm, spectral distance)` for `Λ_side(0)` at
/// `energy`; the norm is `None` for in-spectrum energies.
pub fn sample_norms(
    model: &DisorderModel,
    dim: usize,
    side: u64,
    energy: f64,
    trials: u64,
) -> Result<Vec<(Option<f64>, f64)>> {
    per_trial(model, trials, |t| {
        let op = centered_op(model, dim, side, t)?;
        let eigs = spectral::eigenvalues(&op)?;
        belt_core_norm(&op, &eigs, energy)
    })
}

/// Fraction of trials in which `Λ_side(0)` is not regular for `params`
/// (in-spectrum energies count as singular).
pub fn estimate_singular_prob(
    model: &DisorderModel,
    dim: usize,
    side: u64,
    params: &RegularityParams,
    trials: u64,
) -> Result<MonteCarloEstimate> {
    params.kind.validate()?;
    let norms = sample_norms(model, dim, side, params.energy, trials)?;
    let bad = norms
        .iter()
        .filter(|(n, d)| !verdict_for(*n, *d, params.kind, side).is_regular())
        .count() as u64;
    estimate(model, bad, trials)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyParams {
    pub mass: f64,
    /// Closed energy interval `[lo, hi]`; `lo == hi` checks a single energy.
    pub interval: (f64, f64),
    pub grid_n: usize,
    /// Required spectral gap exponent: `dist(σ, E) > L^{−s}` at every grid energy.
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub energy: f64,
    pub distance: f64,
    pub norm: f64,
    /// `norm` plus the resolvent-identity bound over the grid cell.
    pub padded_norm: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCertificate {
    pub certified: bool,
    pub threshold: f64,
    /// One entry per grid energy; entry `i` covers the cell of radius `h/2`
    /// around it.
    pub points: Vec<GridPoint>,
}

impl CertifyParams {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.interval;
        if self.grid_n < 2 && lo != hi {
            return Err(Error::domain("grid_n must be ≥ 2"));
        }
        if !(lo <= hi) || !(self.mass > 0.0) || !(self.s > 0.0) {
            return Err(Error::domain(format!("invalid certification parameters {self:?}")));
        }
        Ok(())
    }

    fn grid(&self) -> (Vec<f64>, f64) {
        let (lo, hi) = self.interval;
        if lo == hi {
            return (vec![lo], 0.0);
        }
        let h = (hi - lo) / (self.grid_n - 1) as f64;
        ((0..self.grid_n).map(|i| lo + h * i as f64).collect(), h)
    }
}

/// Certifies that the box is `(m, E)`-regular for every `E` in the interval.
///
/// At each grid energy `E_i` the exact belt-to-core norm is computed, and for
/// `|E − E_i| ≤ h/2` the first resolvent identity gives
/// `‖R(E) − R(E_i)‖ ≤ (h/2) / (d_i (d_i − h/2))` with `d_i = dist(σ, E_i)`.
/// A grid point passes when `d_i > max(L^{−s}, h/2)` and norm plus that pad
/// stays under `e^{−mL/2}`. Failures are conservative.
pub fn certify_interval_regularity(op: &FiniteVolumeOperator, params: &CertifyParams) -> Result<IntervalCertificate> {
    let eigs = spectral::eigenvalues(op)?;
    certify_with_spectrum(op, &eigs, params)
}

fn certify_with_spectrum(
    op: &FiniteVolumeOperator,
    eigs: &[f64],
    params: &CertifyParams,
) -> Result<IntervalCertificate> {
    params.validate()?;
    let bx = op.boxspec();
    if !bx.is_msa_grade() {
        return Err(Error::domain(format!("box side {} is not in 6ℕ", bx.side())));
    }
    let side = bx.side();
    let threshold = RegularityKind::Regular { mass: params.mass }.threshold(side);
    let gap = (side as f64).powf(-params.s);
    let core = bx.indices_of_box(&bx.core()?)?;
    let belt = bx.belt_indices();
    let (energies, h) = params.grid();
    let tol = spectral::singular_tolerance(op);
    let mut points = Vec::with_capacity(energies.len());
    for e in energies {
        let d = spectral::dist_to(eigs, e);
        let r = h / 2.0;
        if d <= gap.max(r).max(tol) {
            points.push(GridPoint {
                energy: e,
                distance: d,
                norm: f64::INFINITY,
                padded_norm: f64::INFINITY,
                ok: false,
            });
            continue;
        }
        let norm = ShiftedSolver::new(op, e).block_norm(&belt, &core);
        let padded = norm + r / (d * (d - r));
        points.push(GridPoint {
            energy: e,
            distance: d,
            norm,
            padded_norm: padded,
            ok: padded <= threshold,
        });
    }
    Ok(IntervalCertificate {
        certified: points.iter().all(|p| p.ok),
        threshold,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBoxParams {
    pub side: u64,
    pub first: Site,
    pub second: Site,
    pub rho: u64,
    pub certify: CertifyParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBoxEstimate {
    /// Both boxes fail on a common grid cell.
    pub both: MonteCarloEstimate,
    pub first: MonteCarloEstimate,
    pub second: MonteCarloEstimate,
}

/// Estimates `P{R(m, L, I, x, y)^c}`: both boxes fail certification on a
/// common energy cell. The boxes are built from the same trial environment.
pub fn estimate_two_box_fail(model: &DisorderModel, params: &TwoBoxParams, trials: u64) -> Result<TwoBoxEstimate> {
    let dim = params.first.len();
    if params.second.len() != dim || dim == 0 {
        return Err(Error::domain("two-box centers must share a positive dimension"));
    }
    if sup_dist(&params.first, &params.second) <= (params.side + params.rho) as i64 {
        return Err(Error::domain(format!(
            "centers at distance {} are not beyond L + ϱ = {}",
            sup_dist(&params.first, &params.second),
            params.side + params.rho
        )));
    }
    let bx = BoxSpec::msa_grade(params.first.clone(), params.side)?;
    let by = BoxSpec::msa_grade(params.second.clone(), params.side)?;
    let outcomes = per_trial(model, trials, |t| {
        let cert = |b: &BoxSpec| {
            let op = FiniteVolumeOperator::restricted(model, t, b, BoundaryCondition::Dirichlet);
            certify_interval_regularity(&op, &params.certify)
        };
        let (cx, cy) = (cert(&bx)?, cert(&by)?);
        let common = cx.points.iter().zip(&cy.points).any(|(a, b)| !a.ok && !b.ok);
        Ok((common, !cx.certified, !cy.certified))
    })?;
    let count = |f: fn(&(bool, bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    Ok(TwoBoxEstimate {
        both: estimate(model, count(|o| o.0), trials)?,
        first: estimate(model, count(|o| o.1), trials)?,
        second: estimate(model, count(|o| o.2), trials)?,
    })
}

/// `−2 ln(norm) / L`, the mass for which the norm sits exactly at threshold.
pub fn mass_from_norm(norm: f64, side: u64) -> f64 {
    -2.0 * norm.ln() / side as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedMass {
    pub median: f64,
    pub minimum: f64,
    /// Trials with `E` off the spectrum.
    pub samples: u64,
}

/// Empirical mass read off the belt-to-core norm over trials.
pub fn fitted_mass(model: &DisorderModel, dim: usize, energy: f64, side: u64, trials: u64) -> Result<FittedMass> {
    let masses: Vec<f64> = sample_norms(model, dim, side, energy, trials)?
        .into_iter()
        .filter_map(|(n, _)| n.map(|v| mass_from_norm(v, side)))
        .collect();
    let median = stats::median(&masses)
        .ok_or_else(|| Error::Numerical("energy in the spectrum for every trial".into()))?;
    Ok(FittedMass {
        median,
        minimum: masses.iter().copied().fold(f64::INFINITY, f64::min),
        samples: masses.len() as u64,
    })
}
