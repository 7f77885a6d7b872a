use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::DisorderModel;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub energy: f64,
    pub gamma: f64,
    /// Batch-means 95% interval.
    pub ci95: (f64, f64),
    pub sites: u64,
    pub batches: usize,
}

/// Growth rate of `‖T_n ⋯ T_1 v‖` for the one-dimensional transfer matrices
/// `T_k = [[2 + λω_k − E, −1], [1, 0]]`, sampled over `batches` independent
/// chains of `sites / batches` steps each.
pub fn lyapunov_1d(model: &DisorderModel, energy: f64, sites: u64, batches: usize) -> Result<LyapunovEstimate> {
    if batches < 2 || sites < 100 * batches as u64 {
        return Err(Error::domain("need ≥ 2 batches of ≥ 100 sites"));
    }
    let per = sites / batches as u64;
    let rates: Vec<f64> = (0..batches as u64)
        .into_par_iter()
        .map(|b| {
            let (mut u, mut v) = (1.0f64, 0.0f64);
            let mut log_growth = 0.0;
            let burn = 64;
            for k in 0..per + burn {
                let a = 2.0 + model.coupling * model.site_value(b, &[k as i64]) - energy;
                let next = a * u - v;
                v = u;
                u = next;
                let n = u.hypot(v);
                u /= n;
                v /= n;
                if k >= burn {
                    log_growth += n.ln();
                }
            }
            log_growth / per as f64
        })
        .collect();
    let gamma = stats::mean(&rates);
    let var = rates.iter().map(|r| (r - gamma).powi(2)).sum::<f64>() / (rates.len() - 1) as f64;
    let half = 1.96 * (var / rates.len() as f64).sqrt();
    Ok(LyapunovEstimate {
        energy,
        gamma,
        ci95: (gamma - half, gamma + half),
        sites: per * batches as u64,
        batches,
    })
}
