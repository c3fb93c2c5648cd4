//! Noise-conditional score network trained by weighted denoising score matching.

use std::path::Path;

use crate::adam::AdamState;
use crate::checkpoint::{self, meta_get, meta_require, Metadata};
use crate::embedding::sinusoidal_embedding_into;
use crate::error::{dim, invalid, Error, Result};
use crate::matrix::Matrix;
use crate::mlp::MlpNetwork;
use crate::rng::{stream_id, tags, Rng};
use crate::train::{minibatch, Architecture, TrainConfig};

/// Fraction of `sigma_max` used as the default lower noise level.
pub const DEFAULT_FLOOR_FRACTION: f64 = 0.01;

/// `s(x, level)` approximating the score of the data smoothed at noise std
/// `level`, for levels in `[sigma_floor, sigma_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreModel {
    net: MlpNetwork,
    sigma_max: f64,
    sigma_floor: f64,
    /// Mean subtracted from the training data. Carried so samples can be
    /// mapped back; the network itself works in centered coordinates.
    pub data_mean: Vec<f64>,
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainedScore {
    pub model: ScoreModel,
    pub loss_trace: Vec<f64>,
}

impl ScoreModel {
    pub fn new(net: MlpNetwork, sigma_max: f64, sigma_floor: f64) -> Result<Self> {
        if !(sigma_max > 0.0) || !sigma_max.is_finite() {
            return Err(invalid(format!("sigma_max must be positive, got {sigma_max}")));
        }
        if !(sigma_floor > 0.0) || sigma_floor >= sigma_max {
            return Err(invalid(format!("sigma_floor must lie in (0, {sigma_max}), got {sigma_floor}")));
        }
        if net.output_dim() != net.input_dim() {
            return Err(dim(format!(
                "score network maps {} -> {}, needs equal dimensions",
                net.input_dim(),
                net.output_dim()
            )));
        }
        if !net.is_conditioned() {
            return Err(invalid("score network needs a noise-level embedding"));
        }
        let d = net.input_dim();
        Ok(Self { net, sigma_max, sigma_floor, data_mean: vec![0.0; d] })
    }

    /// Fresh network with fan-in initialisation.
    pub fn init(d: usize, arch: &Architecture, sigma_max: f64, sigma_floor: f64, rng: &mut Rng) -> Result<Self> {
        if arch.embed_dim == 0 {
            return Err(invalid("score architecture needs embed_dim > 0"));
        }
        let net = MlpNetwork::init(&arch.layer_dims(d, d), arch.embed_dim, rng)?;
        Self::new(net, sigma_max, sigma_floor)
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

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    fn check_level(&self, level: f64) -> Result<()> {
        // small slack so grid levels computed as sqrt(1 - k/N) * sigma pass
        let tol = 1e-12 * self.sigma_max;
        if !(level >= self.sigma_floor - tol && level <= self.sigma_max + tol) {
            return Err(invalid(format!("noise level {level} outside [{}, {}]", self.sigma_floor, self.sigma_max)));
        }
        Ok(())
    }

    fn embed(&self, levels: &[f64]) -> Matrix {
        let e = self.net.embed_dim();
        let mut m = Matrix::zeros(levels.len(), e);
        for (i, &l) in levels.iter().enumerate() {
            sinusoidal_embedding_into(l / self.sigma_max, m.row_mut(i)).expect("embed_dim validated at construction");
        }
        m
    }

    /// Score estimate at a single point.
    pub fn estimate(&self, x: &[f64], level: f64) -> Result<Vec<f64>> {
        self.check_level(level)?;
        let e = self.embed(&[level]);
        self.net.forward(x, Some(e.row(0)))
    }

    /// Score estimates for every row of `x`, one noise level per row.
    pub fn estimate_batch(&self, x: &Matrix, levels: &[f64]) -> Result<Matrix> {
        if levels.len() != x.rows() {
            return Err(dim(format!("{} rows but {} noise levels", x.rows(), levels.len())));
        }
        for &l in levels {
            self.check_level(l)?;
        }
        self.net.forward_batch(x, Some(&self.embed(levels)))
    }

    /// Score estimates for every row of `x` at a shared noise level.
    pub fn estimate_at(&self, x: &Matrix, level: f64) -> Result<Matrix> {
        self.estimate_batch(x, &vec![level; x.rows()])
    }

    pub fn metadata(&self) -> Metadata {
        let mut meta = vec![
            ("kind".to_string(), 1.0),
            ("sigma".to_string(), self.sigma_max),
            ("sigma_floor".to_string(), self.sigma_floor),
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
        if meta_get(&meta, "kind") != Some(1.0) {
            return Err(Error::Format(format!("{} is not a score checkpoint", path.display())));
        }
        let mut model = Self::new(net, meta_require(&meta, "sigma")?, meta_require(&meta, "sigma_floor")?)?;
        for i in 0..model.dim() {
            model.data_mean[i] = meta_get(&meta, &format!("mean_{i}")).unwrap_or(0.0);
        }
        Ok(model)
    }
}

/// Loss and summed-then-averaged parameter gradient for a fixed draw of
/// noise levels and perturbations. `noise` rows have variance `levels[i]^2`.
pub fn dsm_loss_with(model: &ScoreModel, x: &Matrix, levels: &[f64], noise: &Matrix) -> Result<(f64, Vec<f64>)> {
    let n = x.rows();
    if n == 0 {
        return Err(invalid("empty batch"));
    }
    if noise.shape() != x.shape() || levels.len() != n {
        return Err(dim("batch, noise and levels disagree in size"));
    }
    let mut noised = x.clone();
    for (a, b) in noised.data_mut().iter_mut().zip(noise.data()) {
        *a += b;
    }
    let embed = model.embed(levels);
    let trace = model.net.forward_trace(&noised, Some(&embed))?;
    let d = x.cols();
    let mut upstream = Matrix::zeros(n, d);
    let mut loss = 0.0;
    for i in 0..n {
        let v = levels[i] * levels[i];
        let s = trace.output.row(i);
        let z = noise.row(i);
        let up = upstream.row_mut(i);
        for j in 0..d {
            let r = s[j] + z[j] / v;
            loss += v * r * r;
            up[j] = 2.0 * v * r / n as f64;
        }
    }
    loss /= n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("score-matching loss is {loss}")));
    }
    let grads = model.net.backward_batch(&trace, Some(&embed), &upstream)?;
    Ok((loss, grads.params))
}

/// Draw one noise level per row with `level^2 ~ U[floor^2, sigma^2]`, perturb,
/// and evaluate the weighted denoising loss.
pub fn dsm_loss(model: &ScoreModel, x: &Matrix, rng: &mut Rng) -> Result<(f64, Vec<f64>)> {
    let (levels, noise) = draw_perturbations(model, x.rows(), x.cols(), rng);
    dsm_loss_with(model, x, &levels, &noise)
}

fn draw_perturbations(model: &ScoreModel, n: usize, d: usize, rng: &mut Rng) -> (Vec<f64>, Matrix) {
    let lo = model.sigma_floor * model.sigma_floor;
    let hi = model.sigma_max * model.sigma_max;
    let levels: Vec<f64> = (0..n).map(|_| rng.uniform_range(lo, hi).sqrt()).collect();
    let mut noise = Matrix::zeros(n, d);
    for i in 0..n {
        let row = noise.row_mut(i);
        rng.fill_normal(row);
        for v in row.iter_mut() {
            *v *= levels[i];
        }
    }
    (levels, noise)
}

/// Train a score network on (already centered) `data`.
pub fn train_score(data: &Matrix, sigma: f64, cfg: &TrainConfig, arch: &Architecture) -> Result<TrainedScore> {
    if data.is_empty() {
        return Err(invalid("training data is empty"));
    }
    cfg.validate()?;
    let floor = cfg.sigma_floor.unwrap_or(DEFAULT_FLOOR_FRACTION * sigma);
    let mut init_rng = Rng::with_stream(cfg.seed, stream_id(tags::INIT, 1));
    let mut model = ScoreModel::init(data.cols(), arch, sigma, floor, &mut init_rng)?;
    let mut rng = Rng::with_stream(cfg.seed, stream_id(tags::TRAIN_SCORE, 0));
    let mut adam = AdamState::new(model.net.num_params(), cfg.adam());
    let mut trace = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let batch = minibatch(data, cfg.batch_size, &mut rng);
        let step = dsm_loss(&model, &batch, &mut rng)
            .and_then(|(loss, g)| adam.update(model.net.params_mut(), &g).map(|_| loss));
        match step {
            Ok(loss) => trace.push(loss),
            Err(e) => return Err(Error::Diverged { iteration: it + 1, reason: e.to_string(), trace }),
        }
    }
    Ok(TrainedScore { model, loss_trace: trace })
}
