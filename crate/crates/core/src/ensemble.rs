//! Random environment and finite-volume Hamiltonians of the lattice
//! Anderson model.
//!
//! Site potentials are generated counter-style: the value at a site is a
//! pure function of `(master_seed, trial_id, coordinates)`. Any two regions
//! queried in the same trial agree on shared sites, and values at distinct
//! sites are independent, so events based on disjoint boxes are independent.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoxSpec;
use crate::spectral;
use crate::stats;

/// Single-site distribution of `ω_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on `[−1, 1]`.
    UniformSymmetric,
    /// `±1` with probability 1/2 each.
    Bernoulli,
    /// Uniform on `[0, 1]`.
    UniformUnit,
}

impl Distribution {
    pub fn support(&self) -> (f64, f64) {
        match self {
            Distribution::UniformSymmetric | Distribution::Bernoulli => (-1.0, 1.0),
            Distribution::UniformUnit => (0.0, 1.0),
        }
    }

    /// Whether the single-site law has a bounded density.
    pub fn has_bounded_density(&self) -> bool {
        !matches!(self, Distribution::Bernoulli)
    }

    fn draw(&self, bits: u64) -> f64 {
        // 53 random bits in [0, 1).
        let u = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        match self {
            Distribution::UniformSymmetric => 2.0 * u - 1.0,
            Distribution::Bernoulli => {
                if bits >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            Distribution::UniformUnit => u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderModel {
    pub coupling: f64,
    pub distribution: Distribution,
    pub master_seed: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based key for one site of one trial.
pub fn site_bits(master_seed: u64, trial_id: u64, site: &[i64]) -> u64 {
    let mut h = mix64(master_seed.wrapping_add(GOLDEN));
    h = mix64(h ^ mix64(trial_id.wrapping_add(2u64.wrapping_mul(GOLDEN))));
    for &c in site {
        h = mix64(h.wrapping_add(GOLDEN) ^ mix64(c as u64 ^ 0x5851_f42d_4c95_7f2d));
    }
    h
}

impl DisorderModel {
    pub fn new(coupling: f64, distribution: Distribution, master_seed: u64) -> Result<Self> {
        let m = DisorderModel {
            coupling,
            distribution,
            master_seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return Err(Error::domain(format!(
                "coupling λ must be finite and ≥ 0, got {}",
                self.coupling
            )));
        }
        Ok(())
    }

    /// `λ = 0`: the operator does not depend on the environment.
    pub fn is_deterministic(&self) -> bool {
        self.coupling == 0.0
    }

    /// `ω_site` for a given trial.
    pub fn site_value(&self, trial_id: u64, site: &[i64]) -> f64 {
        self.distribution
            .draw(site_bits(self.master_seed, trial_id, site))
    }

    /// Interval containing every diagonal potential value `λω`.
    pub fn potential_range(&self) -> (f64, f64) {
        let (a, b) = self.distribution.support();
        (self.coupling * a, self.coupling * b)
    }
}

/// Site values of one trial over a region, in the region's canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSample {
    region: BoxSpec,
    values: Vec<f64>,
    trial_id: u64,
}

impl EnvironmentSample {
    pub fn region(&self) -> &BoxSpec {
        &self.region
    }

    pub fn trial_id(&self) -> u64 {
        self.trial_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, site: &[i64]) -> Option<f64> {
        self.region.index_of(site).map(|i| self.values[i])
    }
}

pub fn sample_environment(model: &DisorderModel, region: &BoxSpec, trial_id: u64) -> EnvironmentSample {
    let values = region
        .sites()
        .iter()
        .map(|s| model.site_value(trial_id, s))
        .collect();
    EnvironmentSample {
        region: region.clone(),
        values,
        trial_id,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    #[default]
    Dirichlet,
    Periodic,
}

/// `H_{ω,x,L}`: the Hamiltonian restricted to a box.
#[derive(Debug, Clone)]
pub struct FiniteVolumeOperator {
    bx: BoxSpec,
    bc: BoundaryCondition,
    matrix: DMatrix<f64>,
    coupling: f64,
    bandwidth: usize,
}

impl FiniteVolumeOperator {
    pub fn boxspec(&self) -> &BoxSpec {
        &self.bx
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest `|i − j|` over nonzero entries.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Row-sum bound on `‖H‖`.
    pub fn norm_bound(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Builds `H_{ω,x,L}` for `box` in trial `trial_id` straight from the model.
    pub fn restricted(
        model: &DisorderModel,
        trial_id: u64,
        bx: &BoxSpec,
        bc: BoundaryCondition,
    ) -> FiniteVolumeOperator {
        let sample = sample_environment(model, bx, trial_id);
        build(bx, &sample.values, bc, model.coupling)
    }

    /// Operator with an explicit potential `λω` list (canonical order); used
    /// for manufactured instances.
    pub fn from_potential(bx: &BoxSpec, omega: &[f64], coupling: f64, bc: BoundaryCondition) -> Result<Self> {
        if omega.len() != bx.len() {
            return Err(Error::domain("potential length does not match the box"));
        }
        Ok(build(bx, omega, bc, coupling))
    }
}

/// Assembles `H = −Δ + λV_ω` on the sample's region.
pub fn assemble(sample: &EnvironmentSample, bc: BoundaryCondition, model: &DisorderModel) -> FiniteVolumeOperator {
    build(&sample.region, &sample.values, bc, model.coupling)
}

/// Assembles `H` on `bx`, reading site values from a sample that covers it.
pub fn assemble_on(
    sample: &EnvironmentSample,
    bx: &BoxSpec,
    bc: BoundaryCondition,
    model: &DisorderModel,
) -> Result<FiniteVolumeOperator> {
    let omega = bx
        .sites()
        .iter()
        .map(|s| {
            sample
                .value_at(s)
                .ok_or_else(|| Error::domain(format!("sample does not cover site {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(build(bx, &omega, bc, model.coupling))
}

fn build(bx: &BoxSpec, omega: &[f64], bc: BoundaryCondition, coupling: f64) -> FiniteVolumeOperator {
    let n = bx.len();
    let d = bx.dim();
    let w = bx.width();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut bandwidth = 0;
    for i in 0..n {
        h[(i, i)] = 2.0 * d as f64 + coupling * omega[i];
    }
    for axis in 0..d {
        let stride = bx.stride(axis);
        for i in 0..n {
            let pos = (i / stride) % w;
            if pos + 1 < w {
                let j = i + stride;
                h[(i, j)] -= 1.0;
                h[(j, i)] -= 1.0;
                bandwidth = bandwidth.max(stride);
            } else if bc == BoundaryCondition::Periodic {
                // wrap to the first site along this axis
                let j = i - pos * stride;
                h[(i, j)] -= 1.0;
                h[(j, i)] -= 1.0;
                bandwidth = bandwidth.max(i - j);
            }
        }
    }
    FiniteVolumeOperator {
        bx: bx.clone(),
        bc,
        matrix: h,
        coupling,
        bandwidth,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub statistic: f64,
    pub critical_1pct: f64,
    pub trials: u64,
}

impl CovarianceReport {
    pub fn consistent(&self) -> bool {
        self.statistic <= self.critical_1pct
    }
}

/// Compares the pooled spectra of `H_{ω,x,L}` and its translate
/// `H_{ω,x+y,L}` over the same trial ids with a two-sample KS statistic.
///
/// The critical value uses the number of trials as the effective sample size
/// (eigenvalues within one trial are not independent; each trial's counting
/// function is one bounded sample).
pub fn check_covariance(
    model: &DisorderModel,
    bx: &BoxSpec,
    shift: &[i64],
    trials: u64,
) -> Result<CovarianceReport> {
    if trials == 0 {
        return Err(Error::domain("covariance check needs trials ≥ 1"));
    }
    if shift.len() != bx.dim() {
        return Err(Error::domain("shift dimension differs from box dimension"));
    }
    let shifted = bx.translated(shift);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let a = FiniteVolumeOperator::restricted(model, t, bx, BoundaryCondition::Dirichlet);
            let b = FiniteVolumeOperator::restricted(model, t, &shifted, BoundaryCondition::Dirichlet);
            Ok((spectral::eigenvalues(&a)?, spectral::eigenvalues(&b)?))
        })
        .collect::<Result<_>>()?;
    let (a, b): (Vec<Vec<f64>>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
    let a: Vec<f64> = a.into_iter().flatten().collect();
    let b: Vec<f64> = b.into_iter().flatten().collect();
    Ok(CovarianceReport {
        statistic: stats::ks_statistic(&a, &b),
        critical_1pct: stats::ks_critical_1pct(trials as usize, trials as usize),
        trials,
    })
}
