//! Exact finite-volume linear algebra: spectra, spectral distances,
//! Green's-function blocks, refined eigenvectors and time evolution.
//!
//! Dense symmetric eigensolves are the ground truth up to a configurable
//! dimension cap. Green's-function blocks go through a banded LU of `H − E`
//! (one solve per requested column); [`oracle`] holds the dense-inverse
//! route used to cross-check it.

pub mod banded;
pub mod oracle;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ensemble::FiniteVolumeOperator;
use crate::error::{Error, Result};
use banded::BandedLu;

pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// `E` counts as spectral when `dist(σ(H), E) < SINGULAR_RELATIVE_TOL·max(1, ‖H‖)`.
pub const SINGULAR_RELATIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `eigenvalues`.
    pub eigenvectors: Option<DMatrix<f64>>,
    /// `max_j ‖H v_j − λ_j v_j‖₂` over the retained pairs (0 without vectors).
    pub residual_bound: f64,
}

impl SpectralData {
    pub fn dist(&self, energy: f64) -> f64 {
        dist_to(&self.eigenvalues, energy)
    }

    /// Number of eigenvalues in the closed interval `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let a = self.eigenvalues.partition_point(|&v| v < lo);
        let b = self.eigenvalues.partition_point(|&v| v <= hi);
        b.saturating_sub(a)
    }

    /// `max |VᵀV − I|`.
    pub fn orthonormality_defect(&self) -> Option<f64> {
        let v = self.eigenvectors.as_ref()?;
        let g = v.transpose() * v;
        Some((g - DMatrix::identity(v.ncols(), v.ncols())).amax())
    }

    pub fn vector(&self, j: usize) -> Option<Vec<f64>> {
        self.eigenvectors
            .as_ref()
            .map(|v| v.column(j).iter().copied().collect())
    }
}

fn check_cap(op: &FiniteVolumeOperator, cap: usize) -> Result<()> {
    if op.dim() > cap {
        return Err(Error::Capacity { dim: op.dim(), cap });
    }
    Ok(())
}

/// Distance from `energy` to an ascending list of eigenvalues.
pub fn dist_to(sorted: &[f64], energy: f64) -> f64 {
    let k = sorted.partition_point(|&v| v < energy);
    let mut best = f64::INFINITY;
    if k < sorted.len() {
        best = best.min((sorted[k] - energy).abs());
    }
    if k > 0 {
        best = best.min((energy - sorted[k - 1]).abs());
    }
    best
}

pub fn eigenvalues(op: &FiniteVolumeOperator) -> Result<Vec<f64>> {
    eigenvalues_with_cap(op, DEFAULT_DENSE_CAP)
}

pub fn eigenvalues_with_cap(op: &FiniteVolumeOperator, cap: usize) -> Result<Vec<f64>> {
    check_cap(op, cap)?;
    let mut vals: Vec<f64> = op.matrix().clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Full eigendecomposition, eigenvalues ascending.
pub fn spectrum(op: &FiniteVolumeOperator) -> Result<SpectralData> {
    spectrum_with_cap(op, DEFAULT_DENSE_CAP)
}

pub fn spectrum_with_cap(op: &FiniteVolumeOperator, cap: usize) -> Result<SpectralData> {
    check_cap(op, cap)?;
    let eig = op.matrix().clone().symmetric_eigen();
    let n = op.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    let hv = op.matrix() * &vectors;
    let residual_bound = (0..n)
        .map(|j| (hv.column(j) - vectors.column(j) * eigenvalues[j]).norm())
        .fold(0.0, f64::max);
    let tol = 1e-8 * op.norm_bound().max(1.0);
    if residual_bound > tol {
        return Err(Error::Numerical(format!(
            "eigensolver residual {residual_bound:e} exceeds {tol:e}"
        )));
    }
    Ok(SpectralData {
        eigenvalues,
        eigenvectors: Some(vectors),
        residual_bound,
    })
}

pub fn spectral_dist(op: &FiniteVolumeOperator, energy: f64) -> Result<f64> {
    Ok(dist_to(&eigenvalues(op)?, energy))
}

pub fn singular_tolerance(op: &FiniteVolumeOperator) -> f64 {
    SINGULAR_RELATIVE_TOL * op.norm_bound().max(1.0)
}

/// Largest singular value; 0 for an empty block.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Banded LU of `H − E`, reusable across column solves.
pub struct ShiftedSolver {
    lu: BandedLu,
    energy: f64,
}

impl ShiftedSolver {
    pub fn new(op: &FiniteVolumeOperator, energy: f64) -> Self {
        ShiftedSolver {
            lu: BandedLu::factor(op.matrix(), op.bandwidth(), energy),
            energy,
        }
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Column `j` of `(H − E)^{-1}`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.lu.solve_unit(j)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = rhs.to_vec();
        self.lu.solve_in_place(&mut b);
        b
    }

    /// The `rows × cols` block of `(H − E)^{-1}`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows.len(), cols.len());
        for (c, &j) in cols.iter().enumerate() {
            let x = self.column(j);
            for (r, &i) in rows.iter().enumerate() {
                out[(r, c)] = x[i];
            }
        }
        out
    }

    pub fn block_norm(&self, rows: &[usize], cols: &[usize]) -> f64 {
        // the resolvent is symmetric, so solve along the shorter side
        if rows.len() < cols.len() {
            operator_norm(&self.block(cols, rows))
        } else {
            operator_norm(&self.block(rows, cols))
        }
    }
}

/// A `row_set × col_set` block of `R(E) = (H − E)^{-1}`, given as index lists
/// in the box's canonical order.
#[derive(Debug, Clone)]
pub struct GreenBlockRequest<'a> {
    pub operator: &'a FiniteVolumeOperator,
    pub energy: f64,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// `‖rows · R(E) · cols‖` through the banded solve path. Fails when `E` is
/// within [`singular_tolerance`] of the spectrum.
pub fn green_block_norm(req: &GreenBlockRequest<'_>) -> Result<f64> {
    let n = req.operator.dim();
    if req.rows.iter().chain(&req.cols).any(|&i| i >= n) {
        return Err(Error::domain("green block index outside the box"));
    }
    let dist = spectral_dist(req.operator, req.energy)?;
    let tolerance = singular_tolerance(req.operator);
    if dist < tolerance {
        return Err(Error::SingularEnergy {
            energy: req.energy,
            distance: dist,
            tolerance,
        });
    }
    Ok(ShiftedSolver::new(req.operator, req.energy).block_norm(&req.rows, &req.cols))
}

/// `Σ_j e^{−iλ_j t} ⟨v_j, ψ⟩ v_j`.
pub fn evolve(data: &SpectralData, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    let v = data
        .eigenvectors
        .as_ref()
        .ok_or_else(|| Error::domain("time evolution needs eigenvectors"))?;
    if psi.len() != v.nrows() {
        return Err(Error::domain("state length does not match the operator"));
    }
    let n = v.nrows();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (j, &lam) in data.eigenvalues.iter().enumerate() {
        let col = v.column(j);
        let c: Complex64 = col.iter().zip(psi).map(|(a, p)| p * *a).sum();
        let phase = Complex64::from_polar(1.0, -lam * t) * c;
        for (o, a) in out.iter_mut().zip(col.iter()) {
            *o += phase * *a;
        }
    }
    Ok(out)
}

/// Re-derives an eigenvector by inverse iteration started at the peak of
/// `guess`. The triangular solves propagate the exponentially small tails
/// multiplicatively, so far-away components keep relative accuracy instead of
/// sitting at the `ε‖H‖` floor of a dense eigensolver. For a degenerate
/// eigenvalue the result lies in the eigenspace but may differ from `guess`.
pub fn refine_eigenvector(op: &FiniteVolumeOperator, eigenvalue: f64, guess: &[f64]) -> Vec<f64> {
    let peak = guess
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let solver = ShiftedSolver::new(op, eigenvalue);
    let mut z = solver.column(peak);
    for _ in 0..2 {
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return guess.to_vec();
        }
        z.iter_mut().for_each(|v| *v /= norm);
        z = solver.solve(&z);
    }
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return guess.to_vec();
    }
    let sign = if z.iter().zip(guess).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    z.iter().map(|v| sign * v / norm).collect()
}
