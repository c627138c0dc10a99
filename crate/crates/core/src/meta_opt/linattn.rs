//! A single trainable linear-attention read-out for in-context regression.
//!
//! The prediction for a query `x_q` given demonstrations `(x_i, y_i)` is
//! `ŷ = x_qᵀ A Σ_i x_i y_i`, with `A` a `d × d` matrix trained on mean squared
//! error. Gradients are written out by hand:
//! `∂L/∂A = (2/B) Σ_b (ŷ_b − y_b) x_{q,b} s_bᵀ` where `s_b = Σ_i x_i y_i`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::{RegressionTask, SaturationCurve};
use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearAttentionConfig {
    pub d: usize,
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub sigma: f64,
    /// Demonstration counts seen in training are uniform on `1..=k_train_max`.
    pub k_train_max: usize,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub seed: u64,
}

impl Default for LinearAttentionConfig {
    fn default() -> Self {
        Self {
            d: 16,
            steps: 10_000,
            lr: 1e-3,
            batch: 128,
            sigma: 0.05,
            k_train_max: 32,
            decay_every: 500,
            decay_factor: 0.5,
            seed: 0,
        }
    }
}

/// One training or evaluation example reduced to what the read-out sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub context: DVector<f64>,
    pub x_query: DVector<f64>,
    pub y_query: f64,
}

impl Sample {
    pub fn from_task(task: &RegressionTask, k: usize) -> Self {
        let (xs, ys) = task.prefix(k);
        Self {
            context: xs.transpose() * ys,
            x_query: task.x_query.clone(),
            y_query: task.y_query,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearAttention {
    pub a: DMatrix<f64>,
}

impl LinearAttention {
    pub fn zeros(d: usize) -> Self {
        Self {
            a: DMatrix::zeros(d, d),
        }
    }

    pub fn predict(&self, s: &Sample) -> f64 {
        s.x_query.dot(&(&self.a * &s.context))
    }

    pub fn loss(&self, batch: &[Sample]) -> f64 {
        let n = batch.len() as f64;
        batch
            .iter()
            .map(|s| (self.predict(s) - s.y_query).powi(2))
            .sum::<f64>()
            / n
    }

    pub fn gradient(&self, batch: &[Sample]) -> DMatrix<f64> {
        let d = self.a.nrows();
        let n = batch.len() as f64;
        let mut g = DMatrix::zeros(d, d);
        for s in batch {
            let r = self.predict(s) - s.y_query;
            g.ger(2.0 * r / n, &s.x_query, &s.context, 1.0);
        }
        g
    }
}

struct Adam {
    m: DMatrix<f64>,
    v: DMatrix<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(d: usize) -> Self {
        Self {
            m: DMatrix::zeros(d, d),
            v: DMatrix::zeros(d, d),
            t: 0,
        }
    }

    fn step(&mut self, param: &mut DMatrix<f64>, grad: &DMatrix<f64>, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for ((p, g), (m, v)) in param
            .iter_mut()
            .zip(grad.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: LinearAttention,
    pub loss_history: Vec<f64>,
}

/// Draws a training batch. Builds `s = Σ x_i y_i` directly without
/// materializing the demonstration matrix.
pub fn sample_batch<R: Rng + ?Sized>(cfg: &LinearAttentionConfig, rng: &mut R) -> Vec<Sample> {
    let d = cfg.d;
    let mut x = vec![0.0; d];
    (0..cfg.batch)
        .map(|_| {
            let k = rng.random_range(1..=cfg.k_train_max);
            let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let mut context = DVector::zeros(d);
            for _ in 0..k {
                let mut y = 0.0;
                for (xj, wj) in x.iter_mut().zip(&w) {
                    *xj = rng.sample(StandardNormal);
                    y += *xj * wj;
                }
                y += cfg.sigma * rng.sample::<f64, _>(StandardNormal);
                for (cj, xj) in context.iter_mut().zip(&x) {
                    *cj += y * xj;
                }
            }
            let x_query = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
            let y_query = x_query.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
                + cfg.sigma * rng.sample::<f64, _>(StandardNormal);
            Sample {
                context,
                x_query,
                y_query,
            }
        })
        .collect()
}

/// Adam on mini-batches with a step learning-rate decay.
pub fn train_linear_attention(cfg: &LinearAttentionConfig) -> Result<TrainedModel> {
    if cfg.steps == 0 || cfg.batch == 0 || cfg.d == 0 || cfg.k_train_max == 0 {
        return Err(invalid("steps, batch, d and k_train_max must be at least 1"));
    }
    let mut rng = stream_rng(cfg.seed, 0);
    let mut model = LinearAttention::zeros(cfg.d);
    let mut opt = Adam::new(cfg.d);
    let mut loss_history = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch = sample_batch(cfg, &mut rng);
        let loss = model.loss(&batch);
        if !loss.is_finite() {
            return Err(Error::Training {
                step,
                msg: format!("loss is {loss}"),
            });
        }
        loss_history.push(loss);
        let grad = model.gradient(&batch);
        let decays = if cfg.decay_every == 0 {
            0
        } else {
            step / cfg.decay_every
        };
        let lr = cfg.lr * cfg.decay_factor.powi(decays as i32);
        opt.step(&mut model.a, &grad, lr);
    }
    Ok(TrainedModel {
        model,
        loss_history,
    })
}

/// Mean squared query error per `k`, with tasks shared across `k`.
pub fn evaluate_linear_attention(
    model: &LinearAttention,
    d: usize,
    sigma: f64,
    k_list: &[usize],
    trials: usize,
    seed: u64,
) -> Vec<f64> {
    let k_max = k_list.iter().copied().max().unwrap_or(0);
    let mut rng = stream_rng(seed, 1);
    let mut sums = vec![0.0; k_list.len()];
    for _ in 0..trials {
        let task = RegressionTask::sample(d, k_max, sigma, &mut rng);
        for (slot, &k) in sums.iter_mut().zip(k_list) {
            let s = Sample::from_task(&task, k);
            *slot += (model.predict(&s) - s.y_query).powi(2);
        }
    }
    sums.iter().map(|s| s / trials as f64).collect()
}

/// Trains one model per seed and evaluates each on fresh tasks.
pub fn linear_attention_curve(
    cfg: &LinearAttentionConfig,
    k_list: &[usize],
    trials: usize,
    seeds: usize,
) -> Result<(Vec<TrainedModel>, SaturationCurve)> {
    if k_list.is_empty() || trials == 0 || seeds == 0 {
        return Err(invalid("k_list, trials and seeds must be non-empty"));
    }
    let runs: Vec<(TrainedModel, Vec<f64>)> = (0..seeds as u64)
        .into_par_iter()
        .map(|s| {
            let seed_cfg = LinearAttentionConfig {
                seed: cfg.seed.wrapping_add(s),
                ..cfg.clone()
            };
            let trained = train_linear_attention(&seed_cfg)?;
            let means = evaluate_linear_attention(
                &trained.model,
                cfg.d,
                cfg.sigma,
                k_list,
                trials,
                seed_cfg.seed,
            );
            Ok((trained, means))
        })
        .collect::<Result<_>>()?;
    let per_seed: Vec<Vec<f64>> = runs.iter().map(|(_, m)| m.clone()).collect();
    let curve = SaturationCurve::from_seed_means(k_list, &per_seed, cfg.d);
    Ok((runs.into_iter().map(|(t, _)| t).collect(), curve))
}
