//! Gaussian-mixture targets with exact smoothing, scores, density ratios, and
//! bridge drifts. They serve as experiment targets and as test oracles.

mod drift;
mod mixture;

pub use drift::{
    density_ratio_exact, drift_stage1_exact, drift_stage2_exact, grad_log_density_ratio_exact, log_density_ratio_exact,
    log_stage1_potential,
};
pub use mixture::{heat_kernel, GaussianMixture, IsotropicGaussian, MixtureSpec};
