//! Independent dense-inverse route for Green's-function blocks, and a
//! self-check suite comparing it with the banded solve path.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{operator_norm, spectrum, ShiftedSolver};
use crate::ensemble::{site_bits, BoundaryCondition, DisorderModel, Distribution, FiniteVolumeOperator};
use crate::error::{Error, Result};
use crate::geometry::BoxSpec;

/// `rows × cols` block of the dense inverse of `H − E`.
pub fn dense_green_block(op: &FiniteVolumeOperator, energy: f64, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
    let n = op.dim();
    let shifted = op.matrix() - DMatrix::identity(n, n) * energy;
    let inv = shifted
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("H − E is not invertible".into()))?;
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |r, c| inv[(rows[r], cols[c])]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub instances: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn new(name: &str, instances: usize, worst: f64, tolerance: f64) -> Self {
        OracleCheck {
            name: name.to_string(),
            instances,
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

fn uniform(seed: u64, k: u64) -> f64 {
    (site_bits(seed, k, &[-7]) >> 11) as f64 / (1u64 << 53) as f64
}

/// Randomized cross-checks of the spectral layer. `instances` random
/// operators (d ∈ {1, 2}, couplings 0, 1, 8) are drawn from `seed`.
pub fn run_suite(seed: u64, instances: usize) -> Result<Vec<OracleCheck>> {
    let mut block_err = 0.0f64;
    let mut full_err = 0.0f64;
    let mut recon_err = 0.0f64;
    let mut ortho_err = 0.0f64;
    for k in 0..instances as u64 {
        let dim = 1 + (k % 2) as usize;
        let side = 6 + 6 * ((k / 2) % 2);
        let coupling = [0.0, 1.0, 8.0][(k % 3) as usize];
        let model = DisorderModel::new(coupling, Distribution::UniformSymmetric, seed)?;
        let bx = BoxSpec::centered(dim, side)?;
        let op = FiniteVolumeOperator::restricted(&model, k, &bx, BoundaryCondition::Dirichlet);
        let data = spectrum(&op)?;
        let (lo, hi) = (-1.0, 4.0 * dim as f64 + coupling + 1.0);
        let mut e = lo + (hi - lo) * uniform(seed, 3 * k);
        if data.dist(e) < 1e-3 {
            e += 2e-3;
        }
        let core = bx.indices_of_box(&bx.core()?)?;
        let belt = bx.belt_indices();
        let solver = ShiftedSolver::new(&op, e);
        let banded = solver.block_norm(&belt, &core);
        let dense = operator_norm(&dense_green_block(&op, e, &belt, &core)?);
        block_err = block_err.max((banded - dense).abs() / dense);
        let all: Vec<usize> = (0..op.dim()).collect();
        let full = solver.block_norm(&all, &all);
        full_err = full_err.max((full * data.dist(e) - 1.0).abs());
        let v = data.eigenvectors.as_ref().expect("vectors");
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(data.eigenvalues.clone()));
        recon_err = recon_err.max((v * d * v.transpose() - op.matrix()).amax());
        ortho_err = ortho_err.max(data.orthonormality_defect().unwrap_or(0.0));
    }

    // free chain against 2 − 2cos(πk/(n+1))
    let mut closed = 0.0f64;
    for side in [4u64, 10, 30] {
        let bx = BoxSpec::centered(1, side)?;
        let op = FiniteVolumeOperator::from_potential(&bx, &vec![0.0; bx.len()], 0.0, BoundaryCondition::Dirichlet)?;
        let n = bx.len();
        for (j, v) in spectrum(&op)?.eigenvalues.iter().enumerate() {
            let want = 2.0 - 2.0 * (std::f64::consts::PI * (j + 1) as f64 / (n + 1) as f64).cos();
            closed = closed.max((v - want).abs());
        }
    }

    // resolvent identity R1 − R2 = (E1 − E2) R1 R2
    let mut resolvent = 0.0f64;
    let model = DisorderModel::new(2.0, Distribution::UniformSymmetric, seed)?;
    let bx = BoxSpec::centered(1, 32)?;
    for k in 0..5u64 {
        let op = FiniteVolumeOperator::restricted(&model, k, &bx, BoundaryCondition::Dirichlet);
        let all: Vec<usize> = (0..op.dim()).collect();
        let e1 = -1.0 + 8.0 * uniform(seed, 3 * k + 1);
        let e2 = -1.0 + 8.0 * uniform(seed, 3 * k + 2);
        let r1 = ShiftedSolver::new(&op, e1).block(&all, &all);
        let r2 = ShiftedSolver::new(&op, e2).block(&all, &all);
        let scale = operator_norm(&r1) * operator_norm(&r2) * (e1 - e2).abs() + 1.0;
        resolvent = resolvent.max(operator_norm(&(&r1 - &r2 - (&r1 * &r2) * (e1 - e2))) / scale);
    }

    Ok(vec![
        OracleCheck::new("closed_form_free_chain", 3, closed, 1e-12),
        OracleCheck::new("reconstruction", instances, recon_err, 1e-9),
        OracleCheck::new("orthonormality", instances, ortho_err, 1e-9),
        OracleCheck::new("banded_vs_dense_block_norm", instances, block_err, 1e-9),
        OracleCheck::new("full_block_equals_inverse_distance", instances, full_err, 1e-9),
        OracleCheck::new("resolvent_identity", 5, resolvent, 1e-9),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_suite(2024, 12).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn dense_block_matches_column_solve() {
        let bx = BoxSpec::centered(2, 6).unwrap();
        let model = DisorderModel::new(1.0, Distribution::Bernoulli, 3).unwrap();
        let op = FiniteVolumeOperator::restricted(&model, 0, &bx, BoundaryCondition::Periodic);
        let rows = vec![0, 3, 7];
        let cols = vec![1, 24];
        let a = dense_green_block(&op, 0.37, &rows, &cols).unwrap();
        let b = ShiftedSolver::new(&op, 0.37).block(&rows, &cols);
        assert!((a - b).amax() < 1e-10);
    }
}
