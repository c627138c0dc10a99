//! Exact t-SNE on a precomputed distance matrix.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embeddings::{cosine_distance_matrix, EmbeddingSet};
use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch: usize,
    pub perplexity_tol: f64,
    pub max_bisection_steps: usize,
    pub min_gain: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 10.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch: 250,
            perplexity_tol: 1e-5,
            max_bisection_steps: 50,
            min_gain: 0.01,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 4 {
            return Err(invalid(format!("t-SNE needs at least 4 points, got {n}")));
        }
        if !(self.perplexity >= 1.0 && self.perplexity < (n - 1) as f64) {
            return Err(invalid(format!(
                "perplexity {} outside [1, {})",
                self.perplexity,
                n - 1
            )));
        }
        if self.iterations == 0 || !(self.learning_rate > 0.0) {
            return Err(invalid("iterations and learning rate must be positive"));
        }
        Ok(())
    }
}

/// Row-normalized conditional affinities and their calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// `p_{j|i}` stored at `(i, j)`.
    pub conditional: DMatrix<f64>,
    pub beta: Vec<f64>,
    pub perplexity: Vec<f64>,
    pub converged: Vec<bool>,
}

/// Conditional distribution for one row at precision `beta`, with its
/// Shannon entropy in nats. Distances are shifted by the row minimum so the
/// exponentials never all underflow.
fn row_distribution(dist: &DMatrix<f64>, i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let n = dist.nrows();
    let d_min = (0..n)
        .filter(|&j| j != i)
        .map(|j| dist[(i, j)])
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for j in 0..n {
        out[j] = if j == i {
            0.0
        } else {
            (-beta * (dist[(i, j)] - d_min)).exp()
        };
        sum += out[j];
    }
    let mut h = 0.0;
    for j in 0..n {
        out[j] /= sum;
        if out[j] > 0.0 {
            h -= out[j] * out[j].ln();
        }
    }
    h
}

/// Bisects on the precision of each row until the row's perplexity matches.
pub fn calibrate(dist: &DMatrix<f64>, cfg: &TsneConfig) -> Calibration {
    let n = dist.nrows();
    let target = cfg.perplexity.ln();
    let mut conditional = DMatrix::zeros(n, n);
    let mut betas = vec![1.0; n];
    let mut perplexity = vec![0.0; n];
    let mut converged = vec![false; n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        let mut h = row_distribution(dist, i, beta, &mut row);
        for _ in 0..cfg.max_bisection_steps {
            if (h - target).abs() < cfg.perplexity_tol {
                converged[i] = true;
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = row_distribution(dist, i, beta, &mut row);
        }
        if !converged[i] && (h - target).abs() < cfg.perplexity_tol {
            converged[i] = true;
        }
        if !converged[i] {
            log::warn!(
                "perplexity bisection did not converge for point {i}: perplexity {:.6}, target {}",
                h.exp(),
                cfg.perplexity
            );
        }
        betas[i] = beta;
        perplexity[i] = h.exp();
        for j in 0..n {
            conditional[(i, j)] = row[j];
        }
    }
    Calibration {
        conditional,
        beta: betas,
        perplexity,
        converged,
    }
}

/// `P = (P_cond + P_condᵀ) / 2n`.
pub fn joint_probabilities(cal: &Calibration) -> DMatrix<f64> {
    let n = cal.conditional.nrows() as f64;
    (&cal.conditional + cal.conditional.transpose()) / (2.0 * n)
}

fn kernel(y: &[[f64; 2]]) -> (DMatrix<f64>, f64) {
    let n = y.len();
    let mut num = DMatrix::zeros(n, n);
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[(i, j)] = v;
            num[(j, i)] = v;
            z += 2.0 * v;
        }
    }
    (num, z)
}

/// `KL(P || Q)` with Student-t affinities `Q` of the layout `y`.
pub fn kl_divergence(p: &DMatrix<f64>, y: &[[f64; 2]]) -> f64 {
    let (num, z) = kernel(y);
    let n = y.len();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[(i, j)];
            if i != j && pij > 0.0 {
                kl += pij * (pij / (num[(i, j)] / z)).ln();
            }
        }
    }
    kl.max(0.0)
}

/// `∂KL/∂y_i = 4 Σ_j (p_ij − q_ij)(1 + |y_i − y_j|²)⁻¹ (y_i − y_j)`.
pub fn kl_gradient(p: &DMatrix<f64>, y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let (num, z) = kernel(y);
    let n = y.len();
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let m = 4.0 * (p[(i, j)] - num[(i, j)] / z) * num[(i, j)];
            grad[i][0] += m * (y[i][0] - y[j][0]);
            grad[i][1] += m * (y[i][1] - y[j][1]);
        }
    }
    grad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: Vec<[f64; 2]>,
    pub kl: f64,
    /// KL with the true affinities right after early exaggeration ends.
    pub kl_after_exaggeration: f64,
    pub seed: u64,
}

pub fn tsne_distances(dist: &DMatrix<f64>, cfg: &TsneConfig, seed: u64) -> Result<Projection2D> {
    let n = dist.nrows();
    if dist.ncols() != n {
        return Err(invalid("distance matrix must be square"));
    }
    cfg.validate(n)?;
    let p = joint_probabilities(&calibrate(dist, cfg));

    let mut rng = stream_rng(seed, 0);
    let init = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [init.sample(&mut rng), init.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let exaggerated = &p * cfg.early_exaggeration;
    let mut kl_after_exaggeration = f64::NAN;

    for it in 0..cfg.iterations {
        if it == cfg.exaggeration_iters {
            kl_after_exaggeration = kl_divergence(&p, &y);
        }
        let target = if it < cfg.exaggeration_iters { &exaggerated } else { &p };
        let grad = kl_gradient(target, &y);
        if grad.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration: it });
        }
        let momentum = if it < cfg.momentum_switch {
            cfg.momentum_initial
        } else {
            cfg.momentum_final
        };
        for i in 0..n {
            for a in 0..2 {
                let g = grad[i][a];
                gains[i][a] = if (g > 0.0) != (update[i][a] > 0.0) {
                    gains[i][a] + 0.2
                } else {
                    gains[i][a] * 0.8
                }
                .max(cfg.min_gain);
                update[i][a] = momentum * update[i][a] - cfg.learning_rate * gains[i][a] * g;
                y[i][a] += update[i][a];
            }
        }
        for a in 0..2 {
            let mean = y.iter().map(|v| v[a]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|v| v[a] -= mean);
        }
    }
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            iteration: cfg.iterations,
        });
    }
    let kl = kl_divergence(&p, &y);
    if cfg.iterations <= cfg.exaggeration_iters {
        kl_after_exaggeration = kl;
    }
    Ok(Projection2D {
        points: y,
        kl,
        kl_after_exaggeration,
        seed,
    })
}

pub fn tsne(set: &EmbeddingSet, cfg: &TsneConfig, seed: u64) -> Result<Projection2D> {
    tsne_distances(&cosine_distance_matrix(set)?, cfg, seed)
}

/// One single-threaded run per seed, in parallel, returned in seed order.
pub fn tsne_seeds(set: &EmbeddingSet, cfg: &TsneConfig, seeds: &[u64]) -> Result<Vec<Projection2D>> {
    if seeds.is_empty() {
        return Err(invalid("seed list is empty"));
    }
    let dist = cosine_distance_matrix(set)?;
    cfg.validate(dist.nrows())?;
    seeds
        .par_iter()
        .map(|&s| tsne_distances(&dist, cfg, s))
        .collect()
}

/// Lowest final KL, ties broken by the smaller seed.
pub fn best_projection(runs: &[Projection2D]) -> Option<&Projection2D> {
    runs.iter()
        .min_by(|a, b| a.kl.total_cmp(&b.kl).then(a.seed.cmp(&b.seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_distances(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, 9);
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        DMatrix::from_fn(n, n, |i, j| {
            (0..3).map(|a| (pts[i][a] - pts[j][a]).powi(2)).sum::<f64>()
        })
    }

    #[test]
    fn calibration_hits_target() {
        let d = random_distances(40, 1);
        let cfg = TsneConfig::default();
        let cal = calibrate(&d, &cfg);
        for (i, (&pp, &ok)) in cal.perplexity.iter().zip(&cal.converged).enumerate() {
            assert!(ok, "row {i}");
            assert!((pp - 10.0).abs() < 1e-3, "row {i}: {pp}");
        }
        let p = joint_probabilities(&cal);
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert!((&p - p.transpose()).amax() < 1e-15);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = random_distances(10, 2);
        let cfg = TsneConfig {
            perplexity: 3.0,
            ..Default::default()
        };
        let p = joint_probabilities(&calibrate(&d, &cfg));
        let mut rng = stream_rng(2, 3);
        let y: Vec<[f64; 2]> = (0..10).map(|_| [rng.random(), rng.random()]).collect();
        let g = kl_gradient(&p, &y);
        let h = 1e-6;
        for i in 0..10 {
            for a in 0..2 {
                let mut plus = y.clone();
                plus[i][a] += h;
                let mut minus = y.clone();
                minus[i][a] -= h;
                let fd = (kl_divergence(&p, &plus) - kl_divergence(&p, &minus)) / (2.0 * h);
                let rel = (fd - g[i][a]).abs() / fd.abs().max(1e-8);
                assert!(rel < 1e-4, "({i},{a}): fd {fd} analytic {}", g[i][a]);
            }
        }
    }

    #[test]
    fn deterministic_and_descending() {
        let d = random_distances(20, 4);
        let cfg = TsneConfig {
            perplexity: 5.0,
            ..Default::default()
        };
        let a = tsne_distances(&d, &cfg, 7).unwrap();
        let b = tsne_distances(&d, &cfg, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.kl <= a.kl_after_exaggeration);
        assert!(a.kl >= 0.0);
    }

    #[test]
    fn rejects_bad_perplexity() {
        let d = random_distances(6, 5);
        for perp in [0.5, 5.0, 9.0] {
            let cfg = TsneConfig {
                perplexity: perp,
                ..Default::default()
            };
            assert!(tsne_distances(&d, &cfg, 0).is_err(), "{perp}");
        }
        let d = random_distances(3, 5);
        let cfg = TsneConfig {
            perplexity: 1.0,
            ..Default::default()
        };
        assert!(tsne_distances(&d, &cfg, 0).is_err());
    }

    #[test]
    fn best_by_kl() {
        let mk = |kl, seed| Projection2D {
            points: vec![],
            kl,
            kl_after_exaggeration: kl,
            seed,
        };
        let runs = [mk(0.5, 3), mk(0.2, 9), mk(0.2, 4)];
        assert_eq!(best_projection(&runs).unwrap().seed, 4);
    }
}
