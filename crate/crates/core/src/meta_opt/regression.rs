//! In-context linear regression: tasks `y = <w, x> + ε`, an analytic
//! in-context learner, and Monte-Carlo risk curves over the number of
//! demonstrations.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::attention::{gaussian_matrix, gaussian_vector};
use crate::error::{invalid, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTask {
    pub w: DVector<f64>,
    pub sigma: f64,
    /// One demonstration per row.
    pub xs: DMatrix<f64>,
    pub ys: DVector<f64>,
    pub x_query: DVector<f64>,
    pub y_query: f64,
}

impl RegressionTask {
    pub fn sample<R: Rng + ?Sized>(d: usize, k: usize, sigma: f64, rng: &mut R) -> Self {
        let w = gaussian_vector(rng, d);
        let xs = gaussian_matrix(rng, k, d, 1.0);
        let noise = DVector::from_fn(k, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
        let ys = &xs * &w + noise;
        let x_query = gaussian_vector(rng, d);
        let y_query = w.dot(&x_query) + sigma * rng.sample::<f64, _>(StandardNormal);
        Self {
            w,
            sigma,
            xs,
            ys,
            x_query,
            y_query,
        }
    }

    pub fn k(&self) -> usize {
        self.xs.nrows()
    }

    pub fn d(&self) -> usize {
        self.w.len()
    }

    /// The first `k` demonstrations of this task. Curves built from nested
    /// prefixes share their randomness across `k`.
    pub fn prefix(&self, k: usize) -> (DMatrix<f64>, DVector<f64>) {
        (
            self.xs.rows(0, k).into_owned(),
            self.ys.rows(0, k).into_owned(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Minimum-norm least squares (pseudo-inverse).
    MinNorm,
    /// Posterior mean under `w ~ N(0, I)`: ridge with penalty `σ²`. Equals
    /// minimum-norm least squares when `σ = 0`.
    #[default]
    Posterior,
}

fn min_norm(xs: &DMatrix<f64>, ys: &DVector<f64>) -> DVector<f64> {
    let (k, d) = xs.shape();
    if k == 0 {
        return DVector::zeros(d);
    }
    if k >= d {
        let gram = xs.transpose() * xs;
        if let Some(ch) = gram.cholesky() {
            return ch.solve(&(xs.transpose() * ys));
        }
    } else {
        let gram = xs * xs.transpose();
        if let Some(ch) = gram.cholesky() {
            return xs.transpose() * ch.solve(ys);
        }
    }
    let pinv = xs
        .clone()
        .pseudo_inverse(1e-12)
        .expect("pseudo-inverse with non-negative epsilon");
    pinv * ys
}

pub fn fit(xs: &DMatrix<f64>, ys: &DVector<f64>, estimator: Estimator, sigma: f64) -> DVector<f64> {
    let lambda = sigma * sigma;
    match estimator {
        Estimator::Posterior if lambda > 0.0 => {
            let d = xs.ncols();
            let mut gram = xs.transpose() * xs;
            for i in 0..d {
                gram[(i, i)] += lambda;
            }
            gram.cholesky()
                .expect("ridge normal matrix is positive definite")
                .solve(&(xs.transpose() * ys))
        }
        _ => min_norm(xs, ys),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    /// Mean over seeds of the per-seed mean squared error.
    pub mean: f64,
    /// Sample standard deviation of the per-seed means.
    pub std: f64,
    pub seeds: usize,
}

impl CurvePoint {
    pub fn sem(&self) -> f64 {
        if self.seeds == 0 {
            0.0
        } else {
            self.std / (self.seeds as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationCurve {
    pub points: Vec<CurvePoint>,
    /// Embedding dimension, where saturation is expected.
    pub threshold: usize,
}

impl SaturationCurve {
    pub fn at(&self, k: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.k == k)
    }

    /// Builds the curve from per-seed rows of per-`k` means.
    pub fn from_seed_means(k_list: &[usize], per_seed: &[Vec<f64>], threshold: usize) -> Self {
        let n = per_seed.len();
        let points = k_list
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let vals: Vec<f64> = per_seed.iter().map(|row| row[i]).collect();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let std = if n > 1 {
                    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                CurvePoint {
                    k,
                    mean,
                    std,
                    seeds: n,
                }
            })
            .collect();
        Self { points, threshold }
    }

    /// `(MSE(late.0) − MSE(late.1)) / (MSE(early.0) − MSE(early.1))`.
    /// `None` when a level is missing or the early drop is not positive.
    pub fn plateau_ratio(&self, early: (usize, usize), late: (usize, usize)) -> Option<f64> {
        let drop = |(a, b): (usize, usize)| Some(self.at(a)?.mean - self.at(b)?.mean);
        let early_drop = drop(early)?;
        if early_drop <= 0.0 {
            return None;
        }
        Some(drop(late)? / early_drop)
    }

    /// Levels `k >= from` where the mean rises over the previous level by more
    /// than `n_sigma` standard errors of the difference.
    pub fn monotone_violations(&self, from: usize, n_sigma: f64) -> Vec<usize> {
        self.points
            .windows(2)
            .filter(|w| w[0].k >= from)
            .filter(|w| {
                let tol = n_sigma * (w[0].sem().powi(2) + w[1].sem().powi(2)).sqrt();
                w[1].mean > w[0].mean + tol
            })
            .map(|w| w[1].k)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "mean", "std"])?;
        for p in &self.points {
            w.write_record([p.k.to_string(), p.mean.to_string(), p.std.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Expected query risk of ordinary least squares under Gaussian design,
/// `σ²(1 + d/(k − d − 1))`, defined for `k > d + 1`.
pub fn ols_expected_risk(d: usize, k: usize, sigma: f64) -> Option<f64> {
    (k > d + 1).then(|| sigma * sigma * (1.0 + d as f64 / (k - d - 1) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsConfig {
    pub d: usize,
    pub sigma: f64,
    pub k_list: Vec<usize>,
    pub trials: usize,
    pub seeds: usize,
    pub seed: u64,
    pub estimator: Estimator,
}

/// Per-seed mean squared query error for every `k`, with tasks shared across
/// `k` through nested demonstration prefixes.
pub fn ols_seed_means(cfg: &OlsConfig, seed_index: usize) -> Vec<f64> {
    let k_max = cfg.k_list.iter().copied().max().unwrap_or(0);
    let mut sums = vec![0.0; cfg.k_list.len()];
    let mut rng = stream_rng(cfg.seed, seed_index as u64);
    for _ in 0..cfg.trials {
        let task = RegressionTask::sample(cfg.d, k_max, cfg.sigma, &mut rng);
        for (slot, &k) in sums.iter_mut().zip(&cfg.k_list) {
            let (xs, ys) = task.prefix(k);
            let w_hat = fit(&xs, &ys, cfg.estimator, cfg.sigma);
            let err = task.y_query - w_hat.dot(&task.x_query);
            *slot += err * err;
        }
    }
    sums.iter().map(|s| s / cfg.trials as f64).collect()
}

pub fn ols_saturation_curve(cfg: &OlsConfig) -> Result<SaturationCurve> {
    if cfg.d == 0 || cfg.k_list.is_empty() || cfg.trials == 0 || cfg.seeds == 0 {
        return Err(invalid("d, k_list, trials and seeds must be non-empty"));
    }
    let per_seed: Vec<Vec<f64>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|s| ols_seed_means(cfg, s))
        .collect();
    Ok(SaturationCurve::from_seed_means(&cfg.k_list, &per_seed, cfg.d))
}
