use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    assemble_on, sample_environment, site_bits, BoundaryCondition, DisorderModel, EnvironmentSample,
    FiniteVolumeOperator,
};
use crate::error::{Error, Result};
use crate::geometry::{is_inside_thick, nonoverlapping, BoxSpec, Separation};
use crate::spectral::{self, ShiftedSolver};
use crate::stats::{self, MonteCarloEstimate};

fn solver_off_spectrum(op: &FiniteVolumeOperator, energy: f64) -> Result<ShiftedSolver> {
    let dist = spectral::spectral_dist(op, energy)?;
    let tolerance = spectral::singular_tolerance(op);
    if dist < tolerance {
        return Err(Error::SingularEnergy {
            energy,
            distance: dist,
            tolerance,
        });
    }
    Ok(ShiftedSolver::new(op, energy))
}

/// Lattice Simon–Lieb ratio
/// `‖Γ_L R_L χ_c‖ / (‖Γ_{ℓ′} R_{ℓ′} χ_c‖ · ‖Γ_L R_L Γ⁺_{ℓ′}‖)`,
/// where `Γ⁺_{ℓ′}` is the layer just outside the inner box. The geometric
/// resolvent identity bounds it by `√d`.
pub fn sli_ratio(
    sample: &EnvironmentSample,
    model: &DisorderModel,
    outer: &BoxSpec,
    inner: &BoxSpec,
    cell: &BoxSpec,
    energy: f64,
) -> Result<f64> {
    if !is_inside_thick(inner, outer)? || !is_inside_thick(cell, inner)? {
        return Err(Error::domain("SLI needs cell ⊏ inner ⊏ outer"));
    }
    let bc = BoundaryCondition::Dirichlet;
    let op_out = assemble_on(sample, outer, bc, model)?;
    let op_in = assemble_on(sample, inner, bc, model)?;
    let r_out = solver_off_spectrum(&op_out, energy)?;
    let r_in = solver_off_spectrum(&op_in, energy)?;
    let belt_out = outer.belt_indices();
    let cell_out = outer.indices_of_box(cell)?;
    let lhs = r_out.block_norm(&belt_out, &cell_out);
    let inner_part = r_in.block_norm(&inner.belt_indices(), &inner.indices_of_box(cell)?);
    let hop = r_out.block_norm(&belt_out, &outer.indices_of_sites(&inner.exterior_layer())?);
    Ok(lhs / (inner_part * hop))
}

/// Lattice eigenfunction decay ratio at the probe center `x`:
/// `|ψ(x)| / (‖Γ_probe R_probe(E) χ_x‖ · ‖Γ⁺_probe ψ‖)` for the eigenpair
/// `(E, ψ)` of the big box with index `eigen_index`; bounded by `√d`.
pub fn edi_ratio(
    sample: &EnvironmentSample,
    model: &DisorderModel,
    big: &BoxSpec,
    probe: &BoxSpec,
    eigen_index: usize,
) -> Result<f64> {
    if !is_inside_thick(probe, big)? {
        return Err(Error::domain("EDI needs probe ⊏ big box"));
    }
    let bc = BoundaryCondition::Dirichlet;
    let op_big = assemble_on(sample, big, bc, model)?;
    let data = spectral::spectrum(&op_big)?;
    let energy = *data
        .eigenvalues
        .get(eigen_index)
        .ok_or_else(|| Error::domain(format!("eigen index {eigen_index} out of range")))?;
    let psi = spectral::refine_eigenvector(&op_big, energy, &data.vector(eigen_index).expect("vectors"));
    edi_ratio_for(sample, model, big, probe, energy, &psi)
}

fn edi_ratio_for(
    sample: &EnvironmentSample,
    model: &DisorderModel,
    big: &BoxSpec,
    probe: &BoxSpec,
    energy: f64,
    psi: &[f64],
) -> Result<f64> {
    let x = big.index_of(probe.center()).expect("probe inside big box");
    if psi[x] == 0.0 {
        return Ok(0.0);
    }
    let op_probe = assemble_on(sample, probe, BoundaryCondition::Dirichlet, model)?;
    let r = solver_off_spectrum(&op_probe, energy)?;
    let centre = probe.index_of(probe.center()).expect("center");
    let green = r.block_norm(&probe.belt_indices(), &[centre]);
    let layer: f64 = big
        .indices_of_sites(&probe.exterior_layer())?
        .iter()
        .map(|&i| psi[i] * psi[i])
        .sum::<f64>()
        .sqrt();
    Ok(psi[x].abs() / (green * layer))
}

/// Uniform offset in `[−r, r]` drawn from the environment's counter stream.
fn offset(model: &DisorderModel, trial: u64, salt: i64, r: i64) -> i64 {
    if r <= 0 {
        return 0;
    }
    let u = site_bits(model.master_seed ^ 0x51_1ed1, trial, &[salt]);
    (u % (2 * r as u64 + 1)) as i64 - r
}

/// Max and median of a ratio over trials; trials hitting the spectrum are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub scale: u64,
    pub max: f64,
    pub median: f64,
    pub samples: u64,
    pub skipped: u64,
}

fn ratio_stats(scale: u64, results: Vec<Result<f64>>) -> Result<RatioStats> {
    let mut vals = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(v) => vals.push(v),
            Err(Error::SingularEnergy { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(RatioStats {
        scale,
        max: vals.iter().copied().fold(0.0, f64::max),
        median: stats::median(&vals).unwrap_or(f64::NAN),
        samples: vals.len() as u64,
        skipped,
    })
}

/// SLI ratios at outer scale `side` (`ℓ′ = side/3`, cell side `ℓ′/3`), with
/// the inner box and the cell placed at random admissible offsets.
pub fn sli_scan(model: &DisorderModel, dim: usize, side: u64, energy: f64, trials: u64) -> Result<RatioStats> {
    if side % 6 != 0 || side < 18 {
        return Err(Error::domain(format!("SLI scan needs a side in 6ℕ, at least 18; got {side}")));
    }
    let ell = side / 3;
    let cell_side = (ell / 3).max(2) & !1;
    let outer = BoxSpec::centered(dim, side)?;
    let r_in = ((side - 3 - ell) / 2) as i64;
    let r_cell = ((ell - 3 - cell_side) / 2) as i64;
    let results = (0..trials)
        .into_par_iter()
        .map(|t| {
            let c_in: Vec<i64> = (0..dim).map(|a| offset(model, t, a as i64, r_in)).collect();
            let inner = BoxSpec::new(c_in.clone(), ell)?;
            let c_cell: Vec<i64> = (0..dim)
                .map(|a| c_in[a] + offset(model, t, 100 + a as i64, r_cell))
                .collect();
            let cell = BoxSpec::new(c_cell, cell_side)?;
            let sample = sample_environment(model, &outer, t);
            sli_ratio(&sample, model, &outer, &inner, &cell, energy)
        })
        .collect();
    ratio_stats(side, results)
}

/// EDI ratios at probe scale `side`: big box `3·side`, eigenvector closest
/// to `energy`, probe at a random admissible offset.
pub fn edi_scan(model: &DisorderModel, dim: usize, side: u64, energy: f64, trials: u64) -> Result<RatioStats> {
    let big_side = 3 * side;
    let big = BoxSpec::centered(dim, big_side)?;
    let r = ((big_side - 3 - side) / 2) as i64;
    let results = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sample = sample_environment(model, &big, t);
            let op = assemble_on(&sample, &big, BoundaryCondition::Dirichlet, model)?;
            let data = spectral::spectrum(&op)?;
            let j = nearest_index(&data.eigenvalues, energy);
            let e = data.eigenvalues[j];
            let psi = spectral::refine_eigenvector(&op, e, &data.vector(j).expect("vectors"));
            let c: Vec<i64> = (0..dim).map(|a| offset(model, t, 200 + a as i64, r)).collect();
            let probe = BoxSpec::new(c, side)?;
            edi_ratio_for(&sample, model, &big, &probe, e, &psi)
        })
        .collect();
    ratio_stats(side, results)
}

fn nearest_index(sorted: &[f64], energy: f64) -> usize {
    let k = sorted.partition_point(|&v| v < energy);
    if k == 0 {
        0
    } else if k == sorted.len() || (energy - sorted[k - 1]) <= (sorted[k] - energy) {
        k - 1
    } else {
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WegnerCurve {
    pub energy: f64,
    pub etas: Vec<f64>,
    pub scales: Vec<u64>,
    /// `p_hat[i][j]`: scale `i`, window `j`.
    pub p_hat: Vec<Vec<MonteCarloEstimate>>,
    /// Joint least squares `ln p = c + a ln η + b ln L` over nonzero cells.
    pub eta_slope: f64,
    pub l_exponent: f64,
}

/// `P{dist(σ(H_{0,L}), E) ≤ η}` over a grid of windows and scales.
pub fn wegner_scan(
    model: &DisorderModel,
    dim: usize,
    energy: f64,
    etas: &[f64],
    scales: &[u64],
    trials: u64,
) -> Result<WegnerCurve> {
    if trials == 0 || etas.is_empty() || scales.is_empty() {
        return Err(Error::domain("wegner scan needs trials, windows and scales"));
    }
    if etas.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::domain("windows η must lie in (0, 1]"));
    }
    let mut p_hat = Vec::new();
    for &side in scales {
        let bx = BoxSpec::centered(dim, side)?;
        let n = if model.is_deterministic() { 1 } else { trials };
        let dists = (0..n)
            .into_par_iter()
            .map(|t| {
                let op = FiniteVolumeOperator::restricted(model, t, &bx, BoundaryCondition::Dirichlet);
                spectral::spectral_dist(&op, energy)
            })
            .collect::<Result<Vec<_>>>()?;
        let row = etas
            .iter()
            .map(|&eta| {
                let k = dists.iter().filter(|&&d| d <= eta).count() as u64;
                if model.is_deterministic() {
                    MonteCarloEstimate::exact(k * trials, trials)
                } else {
                    MonteCarloEstimate::from_counts(k, trials)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        p_hat.push(row);
    }
    let (mut x1, mut x2, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &side) in scales.iter().enumerate() {
        for (j, &eta) in etas.iter().enumerate() {
            let p = p_hat[i][j].p_hat;
            if p > 0.0 {
                x1.push(eta.ln());
                x2.push((side as f64).ln());
                y.push(p.ln());
            }
        }
    }
    let [_, eta_slope, l_exponent] = stats::fit_plane(&x1, &x2, &y).unwrap_or([f64::NAN; 3]);
    Ok(WegnerCurve {
        energy,
        etas: etas.to_vec(),
        scales: scales.to_vec(),
        p_hat,
        eta_slope,
        l_exponent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeRow {
    pub scale: u64,
    pub mean_count: f64,
    /// `mean_count / L^d`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeTable {
    pub interval: (f64, f64),
    pub rows: Vec<NeRow>,
    /// `max ratio / min ratio − 1`.
    pub variation: f64,
}

/// Mean eigenvalue count in `interval` per scale, normalized by `L^d`.
pub fn ne_scan(
    model: &DisorderModel,
    dim: usize,
    interval: (f64, f64),
    scales: &[u64],
    trials: u64,
) -> Result<NeTable> {
    if !(interval.0 <= interval.1) || trials == 0 {
        return Err(Error::domain("NE scan needs a compact interval and trials ≥ 1"));
    }
    let mut rows = Vec::new();
    for &side in scales {
        let bx = BoxSpec::centered(dim, side)?;
        let n = if model.is_deterministic() { 1 } else { trials };
        let counts = (0..n)
            .into_par_iter()
            .map(|t| {
                let op = FiniteVolumeOperator::restricted(model, t, &bx, BoundaryCondition::Dirichlet);
                let eigs = spectral::eigenvalues(&op)?;
                Ok(eigs.iter().filter(|&&e| e >= interval.0 && e <= interval.1).count() as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean_count = stats::mean(&counts);
        rows.push(NeRow {
            scale: side,
            mean_count,
            ratio: mean_count / (side as f64).powi(dim as i32),
        });
    }
    let hi = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(NeTable {
        interval,
        rows,
        variation: if lo > 0.0 { hi / lo - 1.0 } else { 0.0 },
    })
}

/// Distance between two ascending spectra.
pub fn spectra_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().map(|&e| spectral::dist_to(b, e)).fold(f64::INFINITY, f64::min)
}

/// `P{dist(σ(H_u), σ(H_v)) ≤ η}` for two nonoverlapping boxes of the same trial.
pub fn eigenvalue_distance_event(
    model: &DisorderModel,
    first: &BoxSpec,
    second: &BoxSpec,
    sep: Separation,
    eta: f64,
    trials: u64,
) -> Result<MonteCarloEstimate> {
    if first.dim() != second.dim() || !nonoverlapping(first, second, sep) {
        return Err(Error::domain("eigenvalue distance event needs nonoverlapping boxes"));
    }
    let n = if model.is_deterministic() { 1 } else { trials.max(1) };
    let hits = (0..n)
        .into_par_iter()
        .map(|t| {
            let a = spectral::eigenvalues(&FiniteVolumeOperator::restricted(model, t, first, BoundaryCondition::Dirichlet))?;
            let b = spectral::eigenvalues(&FiniteVolumeOperator::restricted(model, t, second, BoundaryCondition::Dirichlet))?;
            Ok(spectra_distance(&a, &b) <= eta)
        })
        .collect::<Result<Vec<bool>>>()?;
    let k = hits.iter().filter(|&&h| h).count() as u64;
    if model.is_deterministic() {
        MonteCarloEstimate::exact(k * trials, trials)
    } else {
        MonteCarloEstimate::from_counts(k, trials)
    }
}
