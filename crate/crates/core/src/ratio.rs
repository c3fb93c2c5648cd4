//! Density-ratio network `f(x) = exp(r(x))` between the smoothed data and a
//! wide reference Gaussian, fitted by logistic regression.

use std::path::Path;

use crate::adam::AdamState;
use crate::checkpoint::{self, meta_get, meta_require, Metadata};
use crate::error::{dim, invalid, Error, Result};
use crate::matrix::Matrix;
use crate::mlp::MlpNetwork;
use crate::rng::{stream_id, tags, Rng};
use crate::train::{minibatch, Architecture, TrainConfig};

pub const DEFAULT_LOGIT_CLAMP: f64 = 30.0;

/// `log(1 + e^x)` without overflow or cancellation.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid, stable at both tails.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioModel {
    net: MlpNetwork,
    sigma: f64,
    tau: f64,
    logit_clamp: f64,
    pub data_mean: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainedRatio {
    pub model: RatioModel,
    pub loss_trace: Vec<f64>,
}

impl RatioModel {
    pub fn new(net: MlpNetwork, sigma: f64, tau: f64, logit_clamp: f64) -> Result<Self> {
        if !(tau > 0.0) || !(sigma > 0.0) || !tau.is_finite() || !sigma.is_finite() {
            return Err(invalid(format!("need sigma, tau > 0, got sigma={sigma} tau={tau}")));
        }
        if !(logit_clamp > 0.0) || !logit_clamp.is_finite() {
            return Err(invalid(format!("logit clamp must be finite and positive, got {logit_clamp}")));
        }
        if net.output_dim() != 1 {
            return Err(dim(format!("ratio network must have scalar output, has {}", net.output_dim())));
        }
        if net.is_conditioned() {
            return Err(invalid("ratio network takes no conditioning input"));
        }
        let d = net.input_dim();
        Ok(Self { net, sigma, tau, logit_clamp, data_mean: vec![0.0; d] })
    }

    pub fn init(d: usize, arch: &Architecture, sigma: f64, tau: f64, rng: &mut Rng) -> Result<Self> {
        let net = MlpNetwork::init(&arch.layer_dims(d, 1), 0, rng)?;
        Self::new(net, sigma, tau, DEFAULT_LOGIT_CLAMP)
    }

    pub fn net(&self) -> &MlpNetwork {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut MlpNetwork {
        &mut self.net
    }

    pub fn dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn logit_clamp(&self) -> f64 {
        self.logit_clamp
    }

    /// Raw (unclamped) logit at one point.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        Ok(self.net.forward(x, None)?[0])
    }

    pub fn logits(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.net.forward_batch(x, None)?.into_data())
    }

    /// `exp(clamp(r(x)))`; always finite and positive.
    pub fn estimate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.clamped_exp(self.logit(x)?))
    }

    pub fn estimate_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.logits(x)?.into_iter().map(|r| self.clamped_exp(r)).collect())
    }

    fn clamped_exp(&self, r: f64) -> f64 {
        // NaN clamps to NaN; callers feed finite inputs only
        r.clamp(-self.logit_clamp, self.logit_clamp).exp()
    }

    pub fn metadata(&self) -> Metadata {
        let mut meta = vec![
            ("kind".to_string(), 2.0),
            ("sigma".to_string(), self.sigma),
            ("tau".to_string(), self.tau),
            ("logit_clamp".to_string(), self.logit_clamp),
        ];
        for (i, m) in self.data_mean.iter().enumerate() {
            meta.push((format!("mean_{i}"), *m));
        }
        meta
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.net, &self.metadata())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (net, meta) = checkpoint::load(path)?;
        if meta_get(&meta, "kind") != Some(2.0) {
            return Err(Error::Format(format!("{} is not a ratio checkpoint", path.display())));
        }
        let mut model = Self::new(
            net,
            meta_require(&meta, "sigma")?,
            meta_require(&meta, "tau")?,
            meta_require(&meta, "logit_clamp")?,
        )?;
        for i in 0..model.dim() {
            model.data_mean[i] = meta_get(&meta, &format!("mean_{i}")).unwrap_or(0.0);
        }
        Ok(model)
    }
}

/// Logistic loss from precomputed logits: mean of
/// `softplus(-r(smoothed_i)) + softplus(r(reference_i))`.
pub fn logistic_loss_from_logits(r_data: &[f64], r_ref: &[f64]) -> Result<f64> {
    if r_data.is_empty() || r_data.len() != r_ref.len() {
        return Err(dim(format!("need equal nonempty batches, got {} and {}", r_data.len(), r_ref.len())));
    }
    let s: f64 = r_data.iter().map(|&r| softplus(-r)).sum::<f64>() + r_ref.iter().map(|&r| softplus(r)).sum::<f64>();
    Ok(s / r_data.len() as f64)
}

/// Loss and parameter gradient. `batch_q` holds smoothed-data samples,
/// `batch_ref` reference-Gaussian samples.
pub fn logistic_loss(model: &RatioModel, batch_q: &Matrix, batch_ref: &Matrix) -> Result<(f64, Vec<f64>)> {
    let n = batch_q.rows();
    if n == 0 || batch_ref.rows() != n {
        return Err(dim(format!("need equal nonempty batches, got {n} and {}", batch_ref.rows())));
    }
    let both = batch_q.vstack(batch_ref)?;
    let trace = model.net.forward_trace(&both, None)?;
    let r = trace.output.data();
    let loss = logistic_loss_from_logits(&r[..n], &r[n..])?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("logistic loss is {loss}")));
    }
    let inv = 1.0 / n as f64;
    let mut up = Vec::with_capacity(2 * n);
    up.extend(r[..n].iter().map(|&v| -sigmoid(-v) * inv));
    up.extend(r[n..].iter().map(|&v| sigmoid(v) * inv));
    let upstream = Matrix::new(2 * n, 1, up)?;
    let grads = model.net.backward_batch(&trace, None, &upstream)?;
    Ok((loss, grads.params))
}

/// Train the ratio network. Every step adds fresh `sigma`-noise to a
/// minibatch of `data` and draws a fresh reference batch with variance `tau`.
pub fn train_ratio(
    data: &Matrix,
    sigma: f64,
    tau: f64,
    cfg: &TrainConfig,
    arch: &Architecture,
) -> Result<TrainedRatio> {
    if data.is_empty() {
        return Err(invalid("training data is empty"));
    }
    cfg.validate()?;
    if tau < sigma * sigma {
        eprintln!("warning: tau = {tau} is below sigma^2 = {}; the ratio may be poorly behaved", sigma * sigma);
    }
    let d = data.cols();
    let mut init_rng = Rng::with_stream(cfg.seed, stream_id(tags::INIT, 2));
    let mut model = RatioModel::init(d, arch, sigma, tau, &mut init_rng)?;
    let mut rng = Rng::with_stream(cfg.seed, stream_id(tags::TRAIN_RATIO, 0));
    let mut adam = AdamState::new(model.net.num_params(), cfg.adam());
    let mut trace = Vec::with_capacity(cfg.iterations);
    let sd_ref = tau.sqrt();
    for it in 0..cfg.iterations {
        let mut q = minibatch(data, cfg.batch_size, &mut rng);
        for v in q.data_mut() {
            *v += sigma * rng.normal();
        }
        let reference = Matrix::from_fn(cfg.batch_size, d, |_, _| sd_ref * rng.normal());
        let step = logistic_loss(&model, &q, &reference)
            .and_then(|(loss, g)| adam.update(model.net.params_mut(), &g).map(|_| loss));
        match step {
            Ok(loss) => trace.push(loss),
            Err(e) => return Err(Error::Diverged { iteration: it + 1, reason: e.to_string(), trace }),
        }
    }
    Ok(TrainedRatio { model, loss_trace: trace })
}
