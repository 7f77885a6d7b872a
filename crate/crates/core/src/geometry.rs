//! Lattice box arithmetic.
//!
//! A box `Λ_L(x)` of even side `L` centered at a lattice site `x` is
//! discretized as `{y ∈ ℤ^d : |y − x|_∞ ≤ L/2 − 1}`, i.e. the lattice points
//! of the open continuum cube. Its boundary belt is the outermost layer
//! `|y − x|_∞ = L/2 − 1`. Sites are ordered lexicographically (first
//! coordinate most significant); that order is the matrix index map used by
//! every operator built on the box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice site.
pub type Site = Vec<i64>;

/// `|a − b|_∞`.
pub fn sup_dist(a: &[i64], b: &[i64]) -> i64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// Largest multiple of 6 not exceeding `k`.
pub fn snap_6n(k: f64) -> Result<u64> {
    if !(k >= 6.0) || !k.is_finite() {
        return Err(Error::domain(format!("snap_6n needs K ≥ 6, got {k}")));
    }
    Ok(6 * (k / 6.0).floor() as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxSpec {
    center: Site,
    side: u64,
}

impl BoxSpec {
    pub fn new(center: Site, side: u64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::domain("box dimension must be at least 1"));
        }
        if side < 2 || side % 2 != 0 {
            return Err(Error::domain(format!("box side must be a positive even integer, got {side}")));
        }
        Ok(BoxSpec { center, side })
    }

    /// A box whose side is additionally a multiple of 6.
    pub fn msa_grade(center: Site, side: u64) -> Result<Self> {
        if side % 6 != 0 {
            return Err(Error::domain(format!("MSA boxes need side in 6ℕ, got {side}")));
        }
        Self::new(center, side)
    }

    /// `Λ_L(0)` in dimension `dim`.
    pub fn centered(dim: usize, side: u64) -> Result<Self> {
        Self::new(vec![0; dim], side)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn side(&self) -> u64 {
        self.side
    }

    pub fn center(&self) -> &[i64] {
        &self.center
    }

    pub fn is_msa_grade(&self) -> bool {
        self.side % 6 == 0
    }

    /// `L/2 − 1`, the sup-distance from the center to the belt.
    pub fn radius(&self) -> i64 {
        self.side as i64 / 2 - 1
    }

    /// Sites per axis, `L − 1`.
    pub fn width(&self) -> usize {
        self.side as usize - 1
    }

    /// Number of sites, `(L − 1)^d`.
    pub fn len(&self) -> usize {
        self.width().pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index stride of `axis` in the canonical ordering.
    pub fn stride(&self, axis: usize) -> usize {
        self.width().pow((self.dim() - 1 - axis) as u32)
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.len() == self.dim() && sup_dist(site, &self.center) <= self.radius()
    }

    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let r = self.radius();
        let w = self.width();
        Some(
            site.iter()
                .zip(&self.center)
                .fold(0usize, |acc, (s, c)| acc * w + (s - c + r) as usize),
        )
    }

    pub fn site_at(&self, mut index: usize) -> Site {
        let w = self.width();
        let r = self.radius();
        let mut site = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            site[axis] = self.center[axis] - r + (index % w) as i64;
            index /= w;
        }
        site
    }

    /// All sites in canonical (lexicographic) order.
    pub fn sites(&self) -> Vec<Site> {
        (0..self.len()).map(|i| self.site_at(i)).collect()
    }

    /// Indices of the boundary belt `Υ_L(x)`.
    pub fn belt_indices(&self) -> Vec<usize> {
        self.shell_indices(self.radius())
    }

    /// Sites of the boundary belt `Υ_L(x)`.
    pub fn belt(&self) -> Vec<Site> {
        self.belt_indices().into_iter().map(|i| self.site_at(i)).collect()
    }

    /// Indices of the sites at sup-distance exactly `r` from the center.
    pub fn shell_indices(&self, r: i64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| sup_dist(&self.site_at(i), &self.center) == r)
            .collect()
    }

    /// The lattice layer just outside the box, `|y − x|_∞ = L/2`.
    pub fn exterior_layer(&self) -> Vec<Site> {
        let outer = BoxSpec {
            center: self.center.clone(),
            side: self.side + 2,
        };
        let r = self.radius() + 1;
        outer
            .sites()
            .into_iter()
            .filter(|s| sup_dist(s, &self.center) == r)
            .collect()
    }

    /// The core `Λ_{L/3}(x)`; requires `L ∈ 6ℕ`.
    pub fn core(&self) -> Result<BoxSpec> {
        if !self.is_msa_grade() {
            return Err(Error::domain(format!(
                "core Λ_(L/3) needs side in 6ℕ, got {}",
                self.side
            )));
        }
        BoxSpec::new(self.center.clone(), self.side / 3)
    }

    /// Positions (in this box's index map) of the sites of `inner`.
    pub fn indices_of_box(&self, inner: &BoxSpec) -> Result<Vec<usize>> {
        self.indices_of_sites(&inner.sites())
    }

    pub fn indices_of_sites(&self, sites: &[Site]) -> Result<Vec<usize>> {
        sites
            .iter()
            .map(|s| {
                self.index_of(s)
                    .ok_or_else(|| Error::domain(format!("site {s:?} lies outside box {self:?}")))
            })
            .collect()
    }

    pub fn translated(&self, shift: &[i64]) -> BoxSpec {
        BoxSpec {
            center: self.center.iter().zip(shift).map(|(c, s)| c + s).collect(),
            side: self.side,
        }
    }
}

/// Thick inclusion `Λ_ℓ(y) ⊏ Λ_L(x)`, i.e. `Λ_ℓ(y) ⊂ Λ_{L−3}(x)` as open
/// cubes. For lattice centers this is `|x − y|_∞ ≤ ⌊(L − 3 − ℓ)/2⌋`.
pub fn is_inside_thick(inner: &BoxSpec, outer: &BoxSpec) -> Result<bool> {
    if inner.dim() != outer.dim() {
        return Err(Error::domain("boxes of different dimension"));
    }
    if outer.side <= inner.side + 3 {
        return Err(Error::domain(format!(
            "thick inclusion needs L > ℓ + 3, got L = {}, ℓ = {}",
            outer.side, inner.side
        )));
    }
    let bound = (outer.side - 3 - inner.side) as i64 / 2;
    Ok(sup_dist(inner.center(), outer.center()) <= bound)
}

/// Independence range `ϱ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Separation {
    pub rho: u64,
}

/// `ϱ`-nonoverlapping: `|x − x'|_∞ > (L + L')/2 + ϱ`.
pub fn nonoverlapping(a: &BoxSpec, b: &BoxSpec, sep: Separation) -> bool {
    assert_eq!(a.dim(), b.dim(), "nonoverlapping: boxes of different dimension");
    let gap = ((a.side + b.side) / 2 + sep.rho) as i64;
    sup_dist(a.center(), b.center()) > gap
}

/// The grid `Ξ_{L,ℓ}(x) = Λ_L(x) ∩ (x + (ℓ/3)ℤ^d)` of cell centers.
#[derive(Debug, Clone)]
pub struct CellGrid {
    parent: BoxSpec,
    ell: u64,
    centers: Vec<Site>,
}

impl CellGrid {
    pub fn new(parent: BoxSpec, ell: u64) -> Result<Self> {
        if ell == 0 || ell % 6 != 0 {
            return Err(Error::domain(format!("cell scale ℓ must lie in 6ℕ, got {ell}")));
        }
        let step = (ell / 3) as i64;
        let reach = parent.radius() / step;
        let per_axis: Vec<i64> = (-reach..=reach).map(|k| k * step).collect();
        let mut centers = vec![parent.center().to_vec()];
        for axis in 0..parent.dim() {
            centers = centers
                .into_iter()
                .flat_map(|c| {
                    per_axis.iter().map(move |off| {
                        let mut s = c.clone();
                        s[axis] += off;
                        s
                    })
                })
                .collect();
        }
        Ok(CellGrid {
            parent,
            ell,
            centers,
        })
    }

    pub fn parent(&self) -> &BoxSpec {
        &self.parent
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn cell_side(&self) -> u64 {
        self.ell / 3
    }

    pub fn centers(&self) -> &[Site] {
        &self.centers
    }

    /// `(3L/ℓ + 1)^d`.
    pub fn count_bound(&self) -> f64 {
        (3.0 * self.parent.side as f64 / self.ell as f64 + 1.0).powi(self.parent.dim() as i32)
    }

    /// Centers `y` with `Λ_ℓ(y) ⊏ Λ_L(x)`; empty when `L ≤ ℓ + 3`.
    pub fn covering_family(&self) -> Vec<Site> {
        if self.parent.side <= self.ell + 3 {
            return Vec::new();
        }
        self.centers
            .iter()
            .filter(|y| {
                let b = BoxSpec {
                    center: (*y).clone(),
                    side: self.ell,
                };
                is_inside_thick(&b, &self.parent).unwrap_or(false)
            })
            .cloned()
            .collect()
    }

    /// Whether every parent site lies in a closed cell `|y − c|_∞ ≤ ℓ/6`.
    pub fn covers_parent(&self) -> bool {
        let half = (self.ell / 6) as i64;
        self.parent
            .sites()
            .iter()
            .all(|s| self.centers.iter().any(|c| sup_dist(s, c) <= half))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn snap_examples() {
        assert_eq!(snap_6n(6.0).unwrap(), 6);
        assert_eq!(snap_6n(13.0).unwrap(), 12);
        assert_eq!(snap_6n(12f64.powf(1.5)).unwrap(), 36);
        assert!(snap_6n(5.9).is_err());
        assert!(snap_6n(f64::NAN).is_err());
    }

    #[test]
    fn site_counts() {
        let b = BoxSpec::centered(1, 2).unwrap();
        assert_eq!(b.sites(), vec![vec![0]]);
        let b = BoxSpec::centered(2, 6).unwrap();
        assert_eq!(b.sites().len(), 25);
        assert_eq!(b.belt().len(), 16);
    }

    #[test]
    fn rejects_odd_sides() {
        assert!(BoxSpec::centered(1, 5).is_err());
        assert!(BoxSpec::centered(1, 0).is_err());
        assert!(BoxSpec::msa_grade(vec![0], 8).is_err());
        assert!(BoxSpec::new(vec![], 6).is_err());
    }

    #[test]
    fn lexicographic_order() {
        let b = BoxSpec::new(vec![3, -1], 4).unwrap();
        let sites = b.sites();
        assert_eq!(sites[0], vec![2, -2]);
        assert_eq!(sites[1], vec![2, -1]);
        assert_eq!(sites[3], vec![3, -2]);
        for (i, s) in sites.iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
        assert_eq!(b.index_of(&[5, 0]), None);
    }

    // Continuum inclusion of the open cube Λ_ℓ(y) in Λ_{L−3}(x), checked on a
    // quarter-integer grid of points strictly inside Λ_ℓ(y).
    fn thick_brute_force(inner: &BoxSpec, outer: &BoxSpec) -> bool {
        let half_inner = inner.side() as f64 / 2.0;
        let half_outer = (outer.side() as f64 - 3.0) / 2.0;
        let n = (inner.side() * 4) as i64;
        let offsets: Vec<f64> = (1..n).map(|k| -half_inner + k as f64 * 0.25).collect();
        let d = inner.dim();
        let mut idx = vec![0usize; d];
        loop {
            let far = (0..d)
                .map(|a| (inner.center()[a] as f64 + offsets[idx[a]] - outer.center()[a] as f64).abs())
                .fold(0.0, f64::max);
            if far >= half_outer {
                return false;
            }
            let mut a = 0;
            while a < d {
                idx[a] += 1;
                if idx[a] < offsets.len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == d {
                return true;
            }
        }
    }

    #[test]
    fn thick_inclusion_examples() {
        let outer = BoxSpec::centered(2, 36).unwrap();
        let at = |x: i64| BoxSpec::new(vec![x, 0], 6).unwrap();
        assert!(is_inside_thick(&at(0), &outer).unwrap());
        assert!(!is_inside_thick(&at(14), &outer).unwrap());
        assert!(!thick_brute_force(&at(14), &outer));
        assert_eq!(
            is_inside_thick(&at(12), &outer).unwrap(),
            thick_brute_force(&at(12), &outer)
        );
        assert!(is_inside_thick(&at(12), &outer).unwrap());
        assert!(is_inside_thick(&outer, &at(0)).is_err());
    }

    #[test]
    fn thick_inclusion_matches_brute_force() {
        for big in [12u64, 18, 24] {
            for small in [2u64, 4, 6] {
                if big <= small + 3 {
                    continue;
                }
                let outer = BoxSpec::centered(1, big).unwrap();
                for x in -(big as i64)..=(big as i64) {
                    let inner = BoxSpec::new(vec![x], small).unwrap();
                    assert_eq!(
                        is_inside_thick(&inner, &outer).unwrap(),
                        thick_brute_force(&inner, &outer),
                        "L={big} ℓ={small} x={x}"
                    );
                }
            }
        }
    }

    #[test]
    fn nonoverlap_examples() {
        let rho0 = Separation { rho: 0 };
        let a = BoxSpec::centered(1, 12).unwrap();
        assert!(nonoverlapping(&a, &BoxSpec::new(vec![13], 12).unwrap(), rho0));
        assert!(!nonoverlapping(&a, &BoxSpec::new(vec![12], 12).unwrap(), rho0));
        let a = BoxSpec::centered(2, 12).unwrap();
        let b = BoxSpec::new(vec![27, -3], 36).unwrap();
        assert!(nonoverlapping(&a, &b, Separation { rho: 2 }));
    }

    #[test]
    fn exterior_layer_counts() {
        let b = BoxSpec::centered(2, 6).unwrap();
        // (L+1)^d − (L−1)^d
        assert_eq!(b.exterior_layer().len(), 49 - 25);
        assert!(b.exterior_layer().iter().all(|s| !b.contains(s)));
    }

    #[test]
    fn cell_grid_count_bound() {
        for big in (12..=48).step_by(6) {
            for ell in (6..=big).step_by(6) {
                for dim in 1..=2 {
                    let g = CellGrid::new(BoxSpec::centered(dim, big).unwrap(), ell).unwrap();
                    assert!(g.centers().len() as f64 <= g.count_bound());
                }
            }
        }
    }

    // The closed cells cover the parent exactly when the outermost site is
    // within ℓ/6 of the last grid point along an axis.
    #[test]
    fn cell_grid_covering() {
        for big in (12u64..=48).step_by(6) {
            for ell in (6u64..big).step_by(6) {
                let step = (ell / 3) as i64;
                let r = big as i64 / 2 - 1;
                let expected = r % step <= step / 2;
                for dim in 1..=2 {
                    let g = CellGrid::new(BoxSpec::centered(dim, big).unwrap(), ell).unwrap();
                    assert_eq!(g.covers_parent(), expected, "L={big} ℓ={ell} d={dim}");
                }
            }
        }
        let g = CellGrid::new(BoxSpec::centered(2, 36).unwrap(), 12).unwrap();
        assert!(g.covers_parent());
        assert!(!g.covering_family().is_empty());
    }

    proptest! {
        #[test]
        fn belt_complement_is_inner_cube(half in 2u64..12, dim in 1usize..=3) {
            let side = 2 * half;
            let b = BoxSpec::centered(dim, side).unwrap();
            let inner = (side as usize - 3).pow(dim as u32);
            prop_assert_eq!(b.len() - b.belt_indices().len(), inner);
        }

        #[test]
        fn snap_idempotent_monotone(a in 6.0f64..1e6, b in 6.0f64..1e6) {
            let sa = snap_6n(a).unwrap();
            prop_assert_eq!(snap_6n(sa as f64).unwrap(), sa);
            prop_assert!(sa as f64 <= a && a < sa as f64 + 6.0);
            if a <= b {
                prop_assert!(sa <= snap_6n(b).unwrap());
            }
        }

        #[test]
        fn nonoverlap_symmetric(x in -40i64..40, y in -40i64..40, l1 in 1u64..10, l2 in 1u64..10, rho in 0u64..4) {
            let a = BoxSpec::new(vec![x, 0], 2 * l1).unwrap();
            let b = BoxSpec::new(vec![0, y], 2 * l2).unwrap();
            let sep = Separation { rho };
            prop_assert_eq!(nonoverlapping(&a, &b, sep), nonoverlapping(&b, &a, sep));
        }
    }
}
