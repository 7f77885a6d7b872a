//! Banded LU factorization with partial pivoting (the `gbtrf`/`gbtrs`
//! scheme) for shifted lattice Hamiltonians `H − E`.
//!
//! With lexicographic site order the lattice Laplacian has bandwidth
//! `(L − 1)^{d−1}`, so column solves cost `O(n·b)` after an `O(n·b²)`
//! factorization instead of the dense `O(n³)`.

use nalgebra::DMatrix;

pub struct BandedLu {
    n: usize,
    kl: usize,
    // upper bandwidth of U after pivoting: kl + ku
    ku2: usize,
    // row-major band storage: entry (i, j) at i*w + (j + kl - i)
    data: Vec<f64>,
    w: usize,
    piv: Vec<usize>,
    // multipliers l(i, k) for i in k+1..=k+kl stored at k*kl + (i-k-1)
    lower: Vec<f64>,
    tiny_pivots: usize,
}

impl BandedLu {
    /// Factors `a − shift·I`, where `a` has equal lower and upper bandwidth
    /// `band`. Exactly zero pivots are replaced by `ε·scale` so that the
    /// factorization can serve inverse iteration; their count is kept.
    pub fn factor(a: &DMatrix<f64>, band: usize, shift: f64) -> Self {
        let n = a.nrows();
        let kl = band.min(n.saturating_sub(1));
        let ku = kl;
        let ku2 = kl + ku;
        let w = 2 * kl + ku + 1;
        let mut data = vec![0.0; n * w];
        let mut scale = 0.0f64;
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                let mut v = a[(i, j)];
                if i == j {
                    v -= shift;
                }
                scale = scale.max(v.abs());
                data[i * w + (j + kl - i)] = v;
            }
        }
        let mut lu = BandedLu {
            n,
            kl,
            ku2,
            data,
            w,
            piv: vec![0; n],
            lower: vec![0.0; n * kl.max(1)],
            tiny_pivots: 0,
        };
        lu.eliminate(scale.max(1.0) * f64::EPSILON);
        lu
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.w + (j + self.kl - i)
    }

    fn eliminate(&mut self, tiny: f64) {
        let n = self.n;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.piv[k] = p;
            let jmax = (k + self.ku2).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let kk = self.idx(k, k);
            if self.data[kk] == 0.0 {
                self.data[kk] = tiny;
                self.tiny_pivots += 1;
            }
            let pivot = self.data[kk];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let m = self.data[ik] / pivot;
                self.data[ik] = 0.0;
                self.lower[k * self.kl + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=jmax {
                        let kj = self.data[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.data[ij] -= m * kj;
                    }
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of exactly-zero pivots that were regularized.
    pub fn tiny_pivots(&self) -> usize {
        self.tiny_pivots
    }

    /// Solves `(a − shift) x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let last = (k + self.kl).min(n - 1);
                for i in k + 1..=last {
                    b[i] -= self.lower[k * self.kl + (i - k - 1)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let jmax = (i + self.ku2).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=jmax {
                s -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
    }

    /// Column `j` of `(a − shift)^{-1}`.
    pub fn solve_unit(&self, j: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.n];
        b[j] = 1.0;
        self.solve_in_place(&mut b);
        b
    }
}
