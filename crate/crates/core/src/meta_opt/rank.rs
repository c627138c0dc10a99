use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::attention::{delta_w_icl, AttentionContext};
use crate::error::{invalid, Result};
use crate::rng::stream_rng;

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    if m.is_empty() {
        return Ok(0);
    }
    let sv = m.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * top).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankObservation {
    pub k: usize,
    pub trial: usize,
    pub rank: usize,
    /// Rank after appending repeated copies of some demonstrations.
    pub duplicated_rank: usize,
}

impl RankObservation {
    pub fn expected(&self, d: usize) -> usize {
        self.k.min(d)
    }
}

/// Draws a fresh Gaussian context for every `(k, trial)` and records the
/// numerical rank of its update, plus the rank once roughly half of the
/// demonstrations have been repeated.
pub fn verify_theorem1(d: usize, k_max: usize, trials: usize, seed: u64) -> Result<Vec<RankObservation>> {
    if d == 0 || k_max == 0 {
        return Err(invalid("d and k_max must be at least 1"));
    }
    let cells: Vec<(usize, usize)> = (1..=k_max)
        .flat_map(|k| (0..trials).map(move |t| (k, t)))
        .collect();
    cells
        .into_par_iter()
        .map(|(k, trial)| {
            let mut rng = stream_rng(seed, (k * trials + trial) as u64);
            let mut ctx = AttentionContext::random(d, k, &mut rng);
            let rank = numerical_rank(&delta_w_icl(&ctx)?, DEFAULT_RANK_TOL)?;
            for _ in 0..k / 2 + 1 {
                let i = rng.random_range(0..k);
                ctx.demos.push(ctx.demos[i].clone());
            }
            let duplicated_rank = numerical_rank(&delta_w_icl(&ctx)?, DEFAULT_RANK_TOL)?;
            Ok(RankObservation {
                k,
                trial,
                rank,
                duplicated_rank,
            })
        })
        .collect()
}
