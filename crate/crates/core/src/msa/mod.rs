//! Multiscale analysis: regularity predicates for finite boxes, Monte Carlo
//! estimates of single- and two-box bad events, scale schedules with their
//! admissibility conditions, and the staged bootstrap.

mod bootstrap;
mod estimate;
mod schedule;

pub use bootstrap::{run_bootstrap, BootstrapConfig, BootstrapReport, MassLedger, ScaleCheck, StageReport};
pub use estimate::{
    certify_interval_regularity, estimate_singular_prob, estimate_two_box_fail, fitted_mass, mass_from_norm,
    sample_norms, CertifyParams, FittedMass, GridPoint, IntervalCertificate, TwoBoxEstimate, TwoBoxParams,
};
pub use schedule::{admissibility, build_schedule, MsaParams, ScaleMode, ScaleSchedule, ScheduleConfig};

use serde::{Deserialize, Serialize};

use crate::ensemble::FiniteVolumeOperator;
use crate::error::{Error, Result};
use crate::spectral::{self, ShiftedSolver};

/// The three box predicates, each a bound on the belt-to-core resolvent block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularityKind {
    /// `‖Γ R χ‖ ≤ L^{−θ}`.
    Suitable { theta: f64 },
    /// `‖Γ R χ‖ ≤ e^{−L^ζ}`.
    SubexpSuitable { zeta: f64 },
    /// `‖Γ R χ‖ ≤ e^{−mL/2}`.
    Regular { mass: f64 },
}

impl RegularityKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RegularityKind::Suitable { theta } => theta > 0.0 && theta.is_finite(),
            RegularityKind::SubexpSuitable { zeta } => zeta > 0.0 && zeta < 1.0,
            RegularityKind::Regular { mass } => mass > 0.0 && mass.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid regularity parameters {self:?}")))
        }
    }

    /// Natural log of the threshold at side `side`.
    pub fn log_threshold(&self, side: u64) -> f64 {
        let l = side as f64;
        match *self {
            RegularityKind::Suitable { theta } => -theta * l.ln(),
            RegularityKind::SubexpSuitable { zeta } => -l.powf(zeta),
            RegularityKind::Regular { mass } => -mass * l / 2.0,
        }
    }

    pub fn threshold(&self, side: u64) -> f64 {
        self.log_threshold(side).exp()
    }

    /// The mass `m` for which `Regular(m)` has the same threshold at `side`.
    pub fn equivalent_mass(&self, side: u64) -> f64 {
        match *self {
            RegularityKind::Suitable { theta } => suitable_to_regular_mass(theta, side),
            RegularityKind::SubexpSuitable { zeta } => subexp_to_regular_mass(zeta, side),
            RegularityKind::Regular { mass } => mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityParams {
    pub kind: RegularityKind,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Regular,
    Singular,
    EnergyInSpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    /// `‖Γ_{x,L} R(E) χ_{x,L/3}‖`; infinite when `E` is in the spectrum.
    pub norm_value: f64,
    pub threshold: f64,
    pub spectral_distance: f64,
    pub verdict: Verdict,
}

impl RegularityVerdict {
    pub fn is_regular(&self) -> bool {
        self.verdict == Verdict::Regular
    }
}

/// `2θ ln L / L`.
pub fn suitable_to_regular_mass(theta: f64, side: u64) -> f64 {
    let l = side as f64;
    2.0 * theta * l.ln() / l
}

/// `2 L^{ζ−1}`.
pub fn subexp_to_regular_mass(zeta: f64, side: u64) -> f64 {
    2.0 * (side as f64).powf(zeta - 1.0)
}

/// Compares a belt-to-core norm with the threshold of `kind` at `side`.
/// Comparison happens in log space, so kinds with equal thresholds give
/// equal verdicts.
pub fn verdict_for(norm: Option<f64>, distance: f64, kind: RegularityKind, side: u64) -> RegularityVerdict {
    let log_thr = kind.log_threshold(side);
    match norm {
        None => RegularityVerdict {
            norm_value: f64::INFINITY,
            threshold: log_thr.exp(),
            spectral_distance: distance,
            verdict: Verdict::EnergyInSpectrum,
        },
        Some(n) => RegularityVerdict {
            norm_value: n,
            threshold: log_thr.exp(),
            spectral_distance: distance,
            verdict: if n.ln() <= log_thr {
                Verdict::Regular
            } else {
                Verdict::Singular
            },
        },
    }
}

/// Belt-to-core norm at `energy` plus the spectral distance; the norm is
/// `None` when the energy is within the singular tolerance of the spectrum.
pub fn belt_core_norm(op: &FiniteVolumeOperator, eigenvalues: &[f64], energy: f64) -> Result<(Option<f64>, f64)> {
    let bx = op.boxspec();
    if !bx.is_msa_grade() {
        return Err(Error::domain(format!("box side {} is not in 6ℕ", bx.side())));
    }
    let dist = spectral::dist_to(eigenvalues, energy);
    if dist < spectral::singular_tolerance(op) {
        return Ok((None, dist));
    }
    let core = bx.indices_of_box(&bx.core()?)?;
    let norm = ShiftedSolver::new(op, energy).block_norm(&bx.belt_indices(), &core);
    Ok((Some(norm), dist))
}

pub fn classify_box(op: &FiniteVolumeOperator, params: &RegularityParams) -> Result<RegularityVerdict> {
    params.kind.validate()?;
    let eigs = spectral::eigenvalues(op)?;
    let (norm, dist) = belt_core_norm(op, &eigs, params.energy)?;
    Ok(verdict_for(norm, dist, params.kind, op.boxspec().side()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{BoundaryCondition, DisorderModel, Distribution};
    use crate::geometry::BoxSpec;
    use crate::spectral::oracle::dense_green_block;
    use approx::assert_relative_eq;

    fn op(side: u64, coupling: f64, trial: u64) -> FiniteVolumeOperator {
        let m = DisorderModel::new(coupling, Distribution::UniformSymmetric, 9).unwrap();
        FiniteVolumeOperator::restricted(&m, trial, &BoxSpec::centered(1, side).unwrap(), BoundaryCondition::Dirichlet)
    }

    #[test]
    fn free_box_against_dense_norm() {
        let h = op(12, 0.0, 0);
        let v = classify_box(
            &h,
            &RegularityParams {
                kind: RegularityKind::Regular { mass: 0.1 },
                energy: -1.0,
            },
        )
        .unwrap();
        assert_relative_eq!(v.threshold, (-0.6f64).exp(), max_relative = 1e-12);
        let bx = h.boxspec();
        let core = bx.indices_of_box(&bx.core().unwrap()).unwrap();
        let dense = spectral::operator_norm(&dense_green_block(&h, -1.0, &bx.belt_indices(), &core).unwrap());
        assert_relative_eq!(v.norm_value, dense, max_relative = 1e-9);
        assert_eq!(v.verdict == Verdict::Regular, dense <= (-0.6f64).exp());
        assert!(v.is_regular());
    }

    #[test]
    fn in_spectrum_energy() {
        let bx = BoxSpec::centered(1, 6).unwrap();
        let h = FiniteVolumeOperator::from_potential(&bx, &[0.0; 5], 0.0, BoundaryCondition::Dirichlet).unwrap();
        let v = classify_box(
            &h,
            &RegularityParams {
                kind: RegularityKind::Suitable { theta: 1.0 },
                energy: 2.0, // middle eigenvalue of the free 5-site chain
            },
        )
        .unwrap();
        assert_eq!(v.verdict, Verdict::EnergyInSpectrum);
    }

    #[test]
    fn rejects_non_grade_box() {
        let h = op(8, 1.0, 0);
        let p = RegularityParams {
            kind: RegularityKind::Regular { mass: 1.0 },
            energy: 0.0,
        };
        assert!(matches!(classify_box(&h, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn mass_conversions() {
        assert_relative_eq!(suitable_to_regular_mass(4.0, 12), 8.0 * 12f64.ln() / 12.0);
        assert_relative_eq!(suitable_to_regular_mass(4.0, 12), 1.6566, epsilon = 1e-4);
        let k = RegularityKind::SubexpSuitable { zeta: 0.6 };
        assert_relative_eq!(
            k.log_threshold(36),
            RegularityKind::Regular { mass: subexp_to_regular_mass(0.6, 36) }.log_threshold(36),
            max_relative = 1e-12
        );
    }

    #[test]
    fn suitable_equals_regular_verdicts() {
        for trial in 0..40 {
            let h = op(24, 4.0, trial);
            for theta in [0.5, 1.0, 2.0, 4.0] {
                let e = 0.3;
                let a = classify_box(&h, &RegularityParams { kind: RegularityKind::Suitable { theta }, energy: e }).unwrap();
                let m = suitable_to_regular_mass(theta, 24);
                let b = classify_box(&h, &RegularityParams { kind: RegularityKind::Regular { mass: m }, energy: e }).unwrap();
                assert_eq!(a.verdict, b.verdict);
            }
        }
    }

    #[test]
    fn verdict_monotone_in_mass() {
        for trial in 0..10 {
            let h = op(18, 2.0, trial);
            let mut was_regular = true;
            for k in 1..40 {
                let mass = 0.05 * k as f64;
                let v = classify_box(&h, &RegularityParams { kind: RegularityKind::Regular { mass }, energy: 0.1 }).unwrap();
                assert!(was_regular || !v.is_regular());
                was_regular = v.is_regular();
            }
        }
    }
}
