//! Linear-attention meta-gradient updates, their rank bound, and regression
//! saturation experiments.

mod attention;
mod linattn;
mod rank;
mod regression;

pub use attention::{delta_w_icl, icl_forward, AttentionContext};
pub use linattn::{
    evaluate_linear_attention, linear_attention_curve, sample_batch, train_linear_attention,
    LinearAttention, LinearAttentionConfig, Sample, TrainedModel,
};
pub use rank::{numerical_rank, verify_theorem1, RankObservation, DEFAULT_RANK_TOL};
pub use regression::{
    fit, ols_expected_risk, ols_saturation_curve, ols_seed_means, CurvePoint, Estimator,
    OlsConfig, RegressionTask, SaturationCurve,
};
