//! Settings and bookkeeping shared by the two estimators.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adam::AdamConfig;
use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Smallest training noise level for the score model. `None` means
    /// `0.01 * sigma`. Ignored by the ratio model.
    pub sigma_floor: Option<f64>,
    /// Set from the experiment seed, never read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::score_2d()
    }
}

impl TrainConfig {
    /// Score-network settings for 2D targets: batch 1000, lr 1e-4, betas (0.5, 0.999).
    pub fn score_2d() -> Self {
        Self {
            batch_size: 1000,
            iterations: 50_000,
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            sigma_floor: None,
            seed: 0,
        }
    }

    /// Ratio-network settings for 2D targets: batch 1000, lr 1e-3,
    /// betas (0.5, 0.999), L2 penalty 0.1.
    pub fn ratio_2d() -> Self {
        Self {
            batch_size: 1000,
            iterations: 50_000,
            lr: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.1,
            sigma_floor: None,
            seed: 0,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps, weight_decay: self.weight_decay }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("need lr > 0 and betas in [0, 1)"));
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(invalid("need eps > 0 and weight_decay >= 0"));
        }
        Ok(())
    }
}

/// Hidden-layer widths and conditioning size of an estimator network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub embed_dim: usize,
}

impl Architecture {
    /// Two hidden layers (256, 512) with the noise-level embedding added after
    /// each hidden linear layer.
    pub fn score_2d() -> Self {
        Self { hidden: vec![256, 512], embed_dim: 32 }
    }

    /// Two hidden layers (256, 512), no conditioning.
    pub fn ratio_2d() -> Self {
        Self { hidden: vec![256, 512], embed_dim: 0 }
    }

    pub fn layer_dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(&self.hidden);
        dims.push(output);
        dims
    }
}

/// Draw `n` rows of `data` uniformly with replacement.
pub(crate) fn minibatch(data: &Matrix, n: usize, rng: &mut Rng) -> Matrix {
    let idx: Vec<usize> = (0..n).map(|_| rng.below(data.rows())).collect();
    data.select_rows(&idx)
}

/// Write a `iteration,loss` CSV.
pub fn write_loss_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iteration,loss")?;
    for (i, l) in trace.iter().enumerate() {
        writeln!(out, "{},{:e}", i + 1, l)?;
    }
    out.flush()?;
    Ok(())
}

/// Trailing moving average with the given window (shorter at the start).
pub fn moving_average(trace: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(trace.len());
    let mut acc = 0.0;
    for i in 0..trace.len() {
        acc += trace[i];
        if i >= window {
            acc -= trace[i - window];
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}
