use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

/// Linear-attention view of a prompt: value/key projections, demonstration
/// embeddings and the zero-shot component acting on the query.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionContext {
    pub w_v: DMatrix<f64>,
    pub w_k: DMatrix<f64>,
    pub w_zsl: DMatrix<f64>,
    pub demos: Vec<DVector<f64>>,
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub(crate) fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

impl AttentionContext {
    /// Projections with i.i.d. `N(0, 1/d)` entries and standard normal demos.
    pub fn random<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (d as f64).sqrt();
        let w_v = gaussian_matrix(rng, d, d, scale);
        let w_k = gaussian_matrix(rng, d, d, scale);
        let w_zsl = gaussian_matrix(rng, d, d, scale);
        let demos = (0..k).map(|_| gaussian_vector(rng, d)).collect();
        Self {
            w_v,
            w_k,
            w_zsl,
            demos,
        }
    }

    pub fn dim(&self) -> usize {
        self.w_v.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (name, m) in [("W_V", &self.w_v), ("W_K", &self.w_k), ("W_ZSL", &self.w_zsl)] {
            if m.shape() != (d, d) {
                return Err(invalid(format!(
                    "{name} is {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if let Some((i, x)) = self.demos.iter().enumerate().find(|(_, x)| x.len() != d) {
            return Err(invalid(format!("demo {i} has length {}, expected {d}", x.len())));
        }
        Ok(())
    }
}

/// `ΔW_ICL = Σ_i (W_V x_i)(W_K x_i)ᵀ`.
pub fn delta_w_icl(ctx: &AttentionContext) -> Result<DMatrix<f64>> {
    ctx.validate()?;
    let d = ctx.dim();
    let mut acc = DMatrix::zeros(d, d);
    for x in &ctx.demos {
        let v = &ctx.w_v * x;
        let k = &ctx.w_k * x;
        acc.ger(1.0, &v, &k, 1.0);
    }
    Ok(acc)
}

/// `F(q) = W_ZSL q + ΔW_ICL q`.
pub fn icl_forward(ctx: &AttentionContext, q: &DVector<f64>) -> Result<DVector<f64>> {
    let delta = delta_w_icl(ctx)?;
    if q.len() != ctx.dim() {
        return Err(invalid(format!(
            "query has length {}, expected {}",
            q.len(),
            ctx.dim()
        )));
    }
    Ok(&ctx.w_zsl * q + delta * q)
}
