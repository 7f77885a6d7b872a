//! Small statistics toolkit: binomial estimates with exact intervals,
//! two-sample Kolmogorov–Smirnov, and least-squares fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};

/// Binomial proportion with a 95% Clopper–Pearson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci95: (f64, f64),
}

impl MonteCarloEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::domain("Monte Carlo estimate needs at least one trial"));
        }
        if successes > trials {
            return Err(Error::domain("more successes than trials"));
        }
        let (k, n) = (successes as f64, trials as f64);
        let alpha = 0.05;
        let lo = if successes == 0 {
            0.0
        } else {
            Beta::new(k, n - k + 1.0)
                .map_err(|e| Error::Numerical(e.to_string()))?
                .inverse_cdf(alpha / 2.0)
        };
        let hi = if successes == trials {
            1.0
        } else {
            Beta::new(k + 1.0, n - k)
                .map_err(|e| Error::Numerical(e.to_string()))?
                .inverse_cdf(1.0 - alpha / 2.0)
        };
        let p_hat = k / n;
        Ok(MonteCarloEstimate {
            successes,
            trials,
            p_hat,
            ci95: (lo.min(p_hat), hi.max(p_hat)),
        })
    }

    /// An exactly known probability (deterministic ensemble): the interval
    /// collapses onto the point.
    pub fn exact(successes: u64, trials: u64) -> Result<Self> {
        let mut e = Self::from_counts(successes, trials)?;
        e.ci95 = (e.p_hat, e.p_hat);
        Ok(e)
    }

    /// Binomial standard error `√(p̂(1 − p̂)/n)`.
    pub fn sigma(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
    }
}

/// Position of a bound relative to a confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Comparison {
    Pass,
    Fail,
    Inconclusive,
}

impl Comparison {
    /// Checks `P(bad) < bound` against the interval of a bad-event estimate.
    pub fn bad_below(est: &MonteCarloEstimate, bound: f64) -> Self {
        if est.ci95.1 < bound {
            Comparison::Pass
        } else if est.ci95.0 >= bound {
            Comparison::Fail
        } else {
            Comparison::Inconclusive
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Comparison::Pass
        } else {
            Comparison::Fail
        }
    }
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Comparison::Pass => "PASS",
            Comparison::Fail => "FAIL",
            Comparison::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level 1% for sample sizes `n`, `m`.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.628 * ((n + m) / (n * m)).sqrt()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LineFit {
        intercept,
        slope,
        r_squared,
    })
}

/// Least squares for `y = c0 + c1·x1 + c2·x2`. Returns `[c0, c1, c2]`.
pub fn fit_plane(x1: &[f64], x2: &[f64], y: &[f64]) -> Option<[f64; 3]> {
    let n = y.len();
    if n < 3 || x1.len() != n || x2.len() != n {
        return None;
    }
    let design = nalgebra::DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => x1[i],
        _ => x2[i],
    });
    let rhs = nalgebra::DVector::from_column_slice(y);
    let normal = design.transpose() * &design;
    let coef = normal.lu().solve(&(design.transpose() * rhs))?;
    Some([coef[0], coef[1], coef[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn clopper_pearson_known_values() {
        // Zero successes: upper limit 1 − 0.025^(1/n).
        let e = MonteCarloEstimate::from_counts(0, 2000).unwrap();
        assert_eq!(e.ci95.0, 0.0);
        assert_relative_eq!(e.ci95.1, 1.0 - 0.025f64.powf(1.0 / 2000.0), max_relative = 1e-8);
        let e = MonteCarloEstimate::from_counts(5, 10).unwrap();
        assert_relative_eq!(e.ci95.0, 0.187086, epsilon = 1e-5);
        assert_relative_eq!(e.ci95.1, 0.812914, epsilon = 1e-5);
        assert!(MonteCarloEstimate::from_counts(0, 0).is_err());
    }

    #[test]
    fn interval_contains_point() {
        for n in [1u64, 7, 100] {
            for k in 0..=n {
                let e = MonteCarloEstimate::from_counts(k, n).unwrap();
                assert!(e.ci95.0 <= e.p_hat && e.p_hat <= e.ci95.1);
            }
        }
    }

    #[test]
    fn comparison_by_interval() {
        let e = MonteCarloEstimate::from_counts(0, 10_000).unwrap();
        assert_eq!(Comparison::bad_below(&e, 0.01), Comparison::Pass);
        let e = MonteCarloEstimate::from_counts(5_000, 10_000).unwrap();
        assert_eq!(Comparison::bad_below(&e, 0.01), Comparison::Fail);
        let e = MonteCarloEstimate::from_counts(1, 100).unwrap();
        assert_eq!(Comparison::bad_below(&e, 0.02), Comparison::Inconclusive);
    }

    #[test]
    fn ks_basics() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert_eq!(ks_statistic(&[0.0, 0.1], &[5.0, 6.0]), 1.0);
        assert_relative_eq!(ks_statistic(&[1.0, 2.0], &[2.0, 3.0]), 0.5);
    }

    #[test]
    fn fits() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.7 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert_relative_eq!(f.slope, -0.7, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        let x2 = [1.0, 0.0, 2.0, 5.0];
        let z: Vec<f64> = (0..4).map(|i| 0.5 + 2.0 * x[i] - 1.0 * x2[i]).collect();
        let c = fit_plane(&x, &x2, &z).unwrap();
        assert_relative_eq!(c[1], 2.0, epsilon = 1e-9);
        assert_relative_eq!(c[2], -1.0, epsilon = 1e-9);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[]), None);
    }
}
