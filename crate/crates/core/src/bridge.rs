//! Two-stage Euler-Maruyama bridge sampler.
//!
//! Stage 1 carries particles from the origin to `q_sigma` over `n1` steps of
//! length `tau / n1`. Stage 2 anneals them from `q_sigma` to the target over
//! `n2` steps of length `sigma^2 / n2`, querying the score at the shrinking
//! noise level `sqrt(1 - k/n2) * sigma`.
//!
//! Each particle owns an RNG stream keyed by `(seed, tag, particle index)` and
//! particles are processed in fixed-size chunks, so results do not depend on
//! the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Error, Result};
use crate::matrix::Matrix;
use crate::ratio::RatioModel;
use crate::reference::{drift_stage1_exact, log_density_ratio_exact, GaussianMixture};
use crate::rng::{stream_id, tags, Rng};
use crate::score::ScoreModel;

/// Particles per work unit. Fixed so the schedule never changes results.
pub const CHUNK: usize = 256;

/// Stage-1 weights whose normalizer falls below this are rejected.
pub const MIN_DENOMINATOR: f64 = 1e-300;

/// Which drifts a run should use; resolved into a [`DriftModel`] by the caller.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftSource {
    /// Trained ratio and score networks.
    #[default]
    Learned,
    /// Closed-form drifts of a Gaussian-mixture target.
    Exact,
    /// Exact density ratio and score fed through the Monte-Carlo stage-1 estimator.
    ExactMonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeConfig {
    pub sigma: f64,
    pub tau: f64,
    pub n1: usize,
    pub n2: usize,
    /// Monte-Carlo draws for each half of the stage-1 drift estimate.
    pub n3: usize,
    pub seed: u64,
    pub final_denoise: bool,
    pub drift_source: DriftSource,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            tau: 5.0,
            n1: 1000,
            n2: 1000,
            n3: 1,
            seed: 0,
            final_denoise: false,
            drift_source: DriftSource::Learned,
        }
    }
}

impl BridgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if self.n1 == 0 || self.n2 == 0 || self.n3 == 0 {
            return Err(invalid("n1, n2 and n3 must all be at least 1"));
        }
        if self.tau < self.sigma * self.sigma {
            eprintln!("warning: tau = {} is below sigma^2 = {}", self.tau, self.sigma * self.sigma);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    One,
    Two,
    Done,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleBatch {
    pub positions: Matrix,
    /// The stage the positions are ready for.
    pub stage: Stage,
    /// Steps taken in the most recent stage.
    pub step_index: usize,
}

impl ParticleBatch {
    /// Wrap externally supplied `q_sigma` samples as a stage-2 start.
    pub fn at_stage2(positions: Matrix) -> Self {
        Self { positions, stage: Stage::Two, step_index: 0 }
    }
}

/// Snapshots of all particles every `every` steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub every: usize,
    /// `(stage, step after which the snapshot was taken, positions)`.
    pub frames: Vec<(u8, usize, Matrix)>,
}

/// Drift ingredients the integrator needs.
pub trait DriftModel: Sync {
    fn dim(&self) -> usize;

    /// `log f` at each row, used by the stage-1 estimator.
    fn log_ratio(&self, x: &Matrix) -> Result<Vec<f64>>;

    /// Score of the target smoothed at noise std `level`, for each row.
    fn score(&self, x: &Matrix, level: f64) -> Result<Matrix>;

    /// Closed-form stage-1 drift, when the model has one and wants it used.
    fn stage1_closed_form(&self, _x: &Matrix, _t: f64) -> Option<Result<Matrix>> {
        None
    }

    /// Reject configurations inconsistent with how the model was built.
    fn check(&self, _cfg: &BridgeConfig) -> Result<()> {
        Ok(())
    }
}

/// Trained networks. The ratio model is only needed for stage 1.
#[derive(Clone, Copy, Debug)]
pub struct LearnedDrift<'a> {
    pub ratio: Option<&'a RatioModel>,
    pub score: &'a ScoreModel,
}

impl<'a> LearnedDrift<'a> {
    pub fn new(ratio: &'a RatioModel, score: &'a ScoreModel) -> Self {
        Self { ratio: Some(ratio), score }
    }

    pub fn score_only(score: &'a ScoreModel) -> Self {
        Self { ratio: None, score }
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl DriftModel for LearnedDrift<'_> {
    fn dim(&self) -> usize {
        self.score.dim()
    }

    fn log_ratio(&self, x: &Matrix) -> Result<Vec<f64>> {
        let ratio = self.ratio.ok_or_else(|| invalid("stage 1 needs a ratio model"))?;
        let c = ratio.logit_clamp();
        Ok(ratio.logits(x)?.into_iter().map(|r| r.clamp(-c, c)).collect())
    }

    fn score(&self, x: &Matrix, level: f64) -> Result<Matrix> {
        // the grid approaches zero where the network was never trained
        let level = level.clamp(self.score.sigma_floor(), self.score.sigma_max());
        self.score.estimate_at(x, level)
    }

    fn check(&self, cfg: &BridgeConfig) -> Result<()> {
        if !same(self.score.sigma_max(), cfg.sigma) {
            return Err(invalid(format!(
                "score model was trained at sigma = {}, run uses {}",
                self.score.sigma_max(),
                cfg.sigma
            )));
        }
        if let Some(r) = self.ratio {
            if !same(r.sigma(), cfg.sigma) || !same(r.tau(), cfg.tau) {
                return Err(invalid(format!(
                    "ratio model was trained at sigma = {}, tau = {}; run uses sigma = {}, tau = {}",
                    r.sigma(),
                    r.tau(),
                    cfg.sigma,
                    cfg.tau
                )));
            }
            if r.dim() != self.score.dim() {
                return Err(dim("ratio and score models disagree in dimension"));
            }
        }
        Ok(())
    }
}

/// Drifts of a Gaussian-mixture target computed in closed form.
#[derive(Clone, Debug)]
pub struct ExactDrift {
    pub target: GaussianMixture,
    pub sigma: f64,
    pub tau: f64,
    /// Use the closed-form stage-1 drift instead of the Monte-Carlo estimator.
    pub closed_form_stage1: bool,
}

impl ExactDrift {
    pub fn new(target: GaussianMixture, sigma: f64, tau: f64) -> Self {
        Self { target, sigma, tau, closed_form_stage1: true }
    }

    /// Exact ingredients, Monte-Carlo stage-1 estimator.
    pub fn monte_carlo(target: GaussianMixture, sigma: f64, tau: f64) -> Self {
        Self { closed_form_stage1: false, ..Self::new(target, sigma, tau) }
    }
}

impl DriftModel for ExactDrift {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn log_ratio(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|r| log_density_ratio_exact(&self.target, self.sigma, self.tau, r)).collect()
    }

    fn score(&self, x: &Matrix, level: f64) -> Result<Matrix> {
        let smoothed = self.target.smooth(level)?;
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(&smoothed.score(x.row(i))?);
        }
        Ok(out)
    }

    fn stage1_closed_form(&self, x: &Matrix, t: f64) -> Option<Result<Matrix>> {
        if !self.closed_form_stage1 {
            return None;
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            match drift_stage1_exact(&self.target, self.sigma, self.tau, t, x.row(i)) {
                Ok(v) => out.row_mut(i).copy_from_slice(&v),
                Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(out))
    }

    fn check(&self, cfg: &BridgeConfig) -> Result<()> {
        if !same(self.sigma, cfg.sigma) || !same(self.tau, cfg.tau) {
            return Err(invalid("exact drift built for a different sigma or tau"));
        }
        Ok(())
    }
}

/// Stage-1 drift at time `t` for every row of `x`, drawing `2 * n3` fresh
/// perturbations per row from that row's generator.
///
/// The first `n3` perturbed points carry the weighted score in the numerator;
/// the other `n3` only enter the normalizing sum.
pub fn stage1_drift_batch(
    drift: &dyn DriftModel,
    x: &Matrix,
    t: f64,
    cfg: &BridgeConfig,
    rngs: &mut [Rng],
) -> Result<Matrix> {
    if !(0.0..1.0).contains(&t) {
        return Err(invalid(format!("stage-1 time must lie in [0, 1), got {t}")));
    }
    if rngs.len() != x.rows() {
        return Err(dim("one generator per particle is required"));
    }
    if let Some(b) = drift.stage1_closed_form(x, t) {
        return b;
    }
    let (n, d, m) = (x.rows(), x.cols(), cfg.n3);
    let spread = (cfg.tau * (1.0 - t)).sqrt();
    let z_scale = ((1.0 - t) / cfg.tau).sqrt();
    // rows ordered particle-major: particle p owns rows [p*2m, (p+1)*2m)
    let mut z = Matrix::zeros(n * 2 * m, d);
    for (p, rng) in rngs.iter_mut().enumerate() {
        rng.fill_normal(&mut z.data_mut()[p * 2 * m * d..(p + 1) * 2 * m * d]);
    }
    let perturbed = Matrix::from_fn(n * 2 * m, d, |i, j| x.get(i / (2 * m), j) + spread * z.get(i, j));
    let log_f = drift.log_ratio(&perturbed)?;
    let num_rows: Vec<usize> = (0..n).flat_map(|p| (0..m).map(move |i| p * 2 * m + i)).collect();
    let scores = drift.score(&perturbed.select_rows(&num_rows), cfg.sigma)?;
    let step = (t * cfg.n1 as f64).round() as usize;
    let mut out = Matrix::zeros(n, d);
    for p in 0..n {
        let lw = &log_f[p * 2 * m..(p + 1) * 2 * m];
        // shift by the largest log-weight so neither sum overflows
        let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let den: f64 = lw[m..].iter().map(|l| (l - top).exp()).sum();
        let log_den = top + den.ln();
        if !(log_den > MIN_DENOMINATOR.ln()) {
            return Err(Error::RatioUnderflow { step, denominator: log_den.exp() });
        }
        let row = out.row_mut(p);
        for i in 0..m {
            let w = (lw[i] - top).exp() / den;
            let s = scores.row(p * m + i);
            let zi = z.row(p * 2 * m + i);
            for j in 0..d {
                row[j] += w * (s[j] + z_scale * zi[j]);
            }
        }
        for j in 0..d {
            row[j] += x.get(p, j) / cfg.tau;
        }
    }
    Ok(out)
}

/// Stage-1 drift at a single point.
pub fn stage1_drift(drift: &dyn DriftModel, x: &[f64], t: f64, cfg: &BridgeConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    let xm = Matrix::new(1, x.len(), x.to_vec())?;
    let mut rngs = [rng.clone()];
    let b = stage1_drift_batch(drift, &xm, t, cfg, &mut rngs)?;
    *rng = rngs[0].clone();
    Ok(b.row(0).to_vec())
}

fn particle_rngs(seed: u64, tag: u32, first: usize, count: usize) -> Vec<Rng> {
    (first..first + count).map(|p| Rng::with_stream(seed, stream_id(tag, p as u32))).collect()
}

type Frames = Vec<(u8, usize, Vec<f64>)>;

/// Particles after a stage plus the snapshots recorded on the way.
type Staged = (ParticleBatch, Vec<(u8, usize, Matrix)>);

/// Run `body` on each chunk of particles in parallel and stitch the recorded
/// frames back together in particle order.
fn par_chunks<F>(positions: &mut Matrix, body: F) -> Result<Vec<(u8, usize, Matrix)>>
where
    F: Fn(usize, &mut [f64]) -> Result<Frames> + Sync,
{
    let d = positions.cols();
    if positions.rows() == 0 {
        return Ok(Vec::new());
    }
    let results: Vec<Result<Frames>> =
        positions.data_mut().par_chunks_mut(CHUNK * d).enumerate().map(|(c, chunk)| body(c * CHUNK, chunk)).collect();
    let mut merged: Vec<(u8, usize, Vec<f64>)> = Vec::new();
    for r in results {
        let frames = r?;
        if merged.is_empty() {
            merged = frames;
        } else {
            for (m, f) in merged.iter_mut().zip(frames) {
                m.2.extend_from_slice(&f.2);
            }
        }
    }
    merged.into_iter().map(|(s, k, data)| Ok((s, k, Matrix::new(data.len() / d, d, data)?))).collect()
}

fn check_finite(x: &[f64], d: usize, stage: u8, step: usize, first: usize) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::ParticleBlowup { stage, step, particle: first + i / d }),
    }
}

fn stage1_impl(drift: &dyn DriftModel, n: usize, cfg: &BridgeConfig, record: usize) -> Result<Staged> {
    cfg.validate()?;
    drift.check(cfg)?;
    let d = drift.dim();
    let mut positions = Matrix::zeros(n, d);
    let h = cfg.tau / cfg.n1 as f64;
    let frames = par_chunks(&mut positions, |first, x| {
        let c = x.len() / d;
        let mut rngs = particle_rngs(cfg.seed, tags::STAGE1, first, c);
        let mut frames = Vec::new();
        for k in 0..cfg.n1 {
            let t = k as f64 / cfg.n1 as f64;
            let xm = Matrix::new(c, d, x.to_vec())?;
            let b = stage1_drift_batch(drift, &xm, t, cfg, &mut rngs)?;
            for p in 0..c {
                let rng = &mut rngs[p];
                for j in 0..d {
                    x[p * d + j] += h * b.get(p, j) + h.sqrt() * rng.normal();
                }
            }
            check_finite(x, d, 1, k + 1, first)?;
            if record > 0 && (k + 1) % record == 0 {
                frames.push((1, k + 1, x.to_vec()));
            }
        }
        Ok(frames)
    })?;
    Ok((ParticleBatch { positions, stage: Stage::Two, step_index: cfg.n1 }, frames))
}

/// Stage 1 from the origin. Returns particles approximately distributed as `q_sigma`.
pub fn run_stage1(drift: &dyn DriftModel, n: usize, cfg: &BridgeConfig) -> Result<ParticleBatch> {
    Ok(stage1_impl(drift, n, cfg, 0)?.0)
}

/// Annealing core shared by sampling, inpainting and interpolation.
///
/// `x` holds `c` particles; `start` is the initial noise level. After each
/// step `project(k + 1, particle, row)` may overwrite coordinates.
#[allow(clippy::too_many_arguments)]
fn anneal_chunk(
    drift: &dyn DriftModel,
    x: &mut [f64],
    d: usize,
    start: f64,
    n2: usize,
    denoise: bool,
    rngs: &mut [Rng],
    first: usize,
    record: usize,
    project: &(dyn Fn(usize, usize, &mut [f64]) + Sync),
) -> Result<Frames> {
    let c = x.len() / d;
    let h = start * start / n2 as f64;
    let mut frames = Vec::new();
    for k in 0..n2 {
        let level = (1.0 - k as f64 / n2 as f64).sqrt() * start;
        let xm = Matrix::new(c, d, x.to_vec())?;
        let b = drift.score(&xm, level)?;
        for p in 0..c {
            let rng = &mut rngs[p];
            let row = &mut x[p * d..(p + 1) * d];
            for j in 0..d {
                row[j] += h * b.get(p, j) + h.sqrt() * rng.normal();
            }
            project(k + 1, first + p, row);
        }
        check_finite(x, d, 2, k + 1, first)?;
        if record > 0 && (k + 1) % record == 0 {
            frames.push((2, k + 1, x.to_vec()));
        }
    }
    if denoise {
        let xm = Matrix::new(c, d, x.to_vec())?;
        let b = drift.score(&xm, start / (n2 as f64).sqrt())?;
        for p in 0..c {
            let row = &mut x[p * d..(p + 1) * d];
            for j in 0..d {
                row[j] += h * b.get(p, j);
            }
            project(n2, first + p, row);
        }
        check_finite(x, d, 2, n2 + 1, first)?;
    }
    Ok(frames)
}

fn no_projection(_: usize, _: usize, _: &mut [f64]) {}

fn stage2_impl(drift: &dyn DriftModel, start: ParticleBatch, cfg: &BridgeConfig, record: usize) -> Result<Staged> {
    cfg.validate()?;
    drift.check(cfg)?;
    if start.stage != Stage::Two {
        return Err(invalid("stage 2 needs particles that finished stage 1"));
    }
    let d = drift.dim();
    if start.positions.cols() != d {
        return Err(dim(format!("particles have {} coordinates, model {d}", start.positions.cols())));
    }
    let mut positions = start.positions;
    let frames = par_chunks(&mut positions, |first, x| {
        let mut rngs = particle_rngs(cfg.seed, tags::STAGE2, first, x.len() / d);
        anneal_chunk(drift, x, d, cfg.sigma, cfg.n2, cfg.final_denoise, &mut rngs, first, record, &no_projection)
    })?;
    Ok((ParticleBatch { positions, stage: Stage::Done, step_index: cfg.n2 }, frames))
}

/// Stage 2 from `q_sigma` samples to the target.
pub fn run_stage2(drift: &dyn DriftModel, start: ParticleBatch, cfg: &BridgeConfig) -> Result<ParticleBatch> {
    Ok(stage2_impl(drift, start, cfg, 0)?.0)
}

/// Both stages. Equivalent to [`run_stage1`] followed by [`run_stage2`].
pub fn sample(drift: &dyn DriftModel, n: usize, cfg: &BridgeConfig) -> Result<Matrix> {
    let mid = run_stage1(drift, n, cfg)?;
    Ok(run_stage2(drift, mid, cfg)?.positions)
}

/// Both stages, keeping a snapshot every `every` steps of each stage.
pub fn sample_with_trajectory(
    drift: &dyn DriftModel,
    n: usize,
    cfg: &BridgeConfig,
    every: usize,
) -> Result<(Matrix, Trajectory)> {
    if every == 0 {
        return Err(invalid("trajectory interval must be at least 1"));
    }
    let (mid, mut frames) = stage1_impl(drift, n, cfg, every)?;
    let (done, f2) = stage2_impl(drift, mid, cfg, every)?;
    frames.extend(f2);
    Ok((done.positions, Trajectory { every, frames }))
}

/// Stage 2 only, started from the uninformative reference `N(0, tau I)`
/// instead of stage-1 output.
pub fn sample_skip_stage1(drift: &dyn DriftModel, n: usize, cfg: &BridgeConfig) -> Result<Matrix> {
    let start = reference_start(n, drift.dim(), cfg)?;
    Ok(run_stage2(drift, start, cfg)?.positions)
}

/// `n` draws from `N(0, tau I)` packaged as a stage-2 start. Uses the
/// stage-1 particle streams, which a skipped stage 1 leaves unused.
pub fn reference_start(n: usize, d: usize, cfg: &BridgeConfig) -> Result<ParticleBatch> {
    cfg.validate()?;
    let sd = cfg.tau.sqrt();
    let mut start = Matrix::zeros(n, d);
    for p in 0..n {
        let mut rng = Rng::with_stream(cfg.seed, stream_id(tags::STAGE1, p as u32));
        for v in start.row_mut(p) {
            *v = sd * rng.normal();
        }
    }
    Ok(ParticleBatch::at_stage2(start))
}

/// Stage 1 only, keeping a snapshot every `every` steps.
pub fn run_stage1_with_trajectory(
    drift: &dyn DriftModel,
    n: usize,
    cfg: &BridgeConfig,
    every: usize,
) -> Result<(ParticleBatch, Trajectory)> {
    if every == 0 {
        return Err(invalid("trajectory interval must be at least 1"));
    }
    let (mid, frames) = stage1_impl(drift, n, cfg, every)?;
    Ok((mid, Trajectory { every, frames }))
}

/// Stage-2 run from a supplied snapshot, keeping snapshots every `every`
/// steps. Useful to check intermediate marginals.
pub fn run_stage2_with_trajectory(
    drift: &dyn DriftModel,
    start: ParticleBatch,
    cfg: &BridgeConfig,
    every: usize,
) -> Result<(ParticleBatch, Trajectory)> {
    if every == 0 {
        return Err(invalid("trajectory interval must be at least 1"));
    }
    let (done, frames) = stage2_impl(drift, start, cfg, every)?;
    Ok((done, Trajectory { every, frames }))
}

/// Masked completion: coordinates where `mask` is 1 are observed.
#[derive(Clone, Debug, PartialEq)]
pub struct InpaintTask {
    y: Vec<f64>,
    mask: Vec<f64>,
    pub config: BridgeConfig,
}

impl InpaintTask {
    /// `observed` is the full vector; entries outside the mask are zeroed.
    pub fn new(observed: &[f64], mask: &[f64], config: BridgeConfig) -> Result<Self> {
        if observed.len() != mask.len() {
            return Err(dim("observation and mask differ in length"));
        }
        if let Some(m) = mask.iter().find(|&&m| m != 0.0 && m != 1.0) {
            return Err(invalid(format!("mask entries must be 0 or 1, found {m}")));
        }
        let y = observed.iter().zip(mask).map(|(&v, &m)| if m == 1.0 { v } else { 0.0 }).collect();
        Ok(Self { y, mask: mask.to_vec(), config })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }
}

/// Stage-2 completion with the observed coordinates re-imposed after every
/// step at the matching noise level. The output agrees with `y` exactly on
/// the mask.
pub fn inpaint(task: &InpaintTask, drift: &dyn DriftModel, rng: &mut Rng) -> Result<Vec<f64>> {
    let cfg = &task.config;
    cfg.validate()?;
    drift.check(cfg)?;
    let d = task.y.len();
    if drift.dim() != d {
        return Err(dim(format!("task has {d} coordinates, model {}", drift.dim())));
    }
    let z = rng.normals(d);
    let mut x: Vec<f64> = (0..d).map(|j| task.y[j] + cfg.sigma * z[j]).collect();
    let n2 = cfg.n2 as f64;
    let project = |k: usize, _: usize, row: &mut [f64]| {
        let level = (1.0 - k as f64 / n2).max(0.0).sqrt() * cfg.sigma;
        for j in 0..row.len() {
            if task.mask[j] == 1.0 {
                row[j] = if level > 0.0 { task.y[j] + level * z[j] } else { task.y[j] };
            }
        }
    };
    let mut rngs = [rng.clone()];
    anneal_chunk(drift, &mut x, d, cfg.sigma, cfg.n2, cfg.final_denoise, &mut rngs, 0, 0, &project)?;
    *rng = rngs[0].clone();
    Ok(x)
}

/// Perturb the blend `(1 - lambda) a + lambda b` with noise of std
/// `sigma_interp` and anneal it back to the data with stage 2.
pub fn interpolate(
    a: &[f64],
    b: &[f64],
    lambda: f64,
    sigma_interp: f64,
    drift: &dyn DriftModel,
    cfg: &BridgeConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    drift.check(cfg)?;
    if a.len() != b.len() || a.len() != drift.dim() {
        return Err(dim("endpoints and model must share a dimension"));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if !(sigma_interp > 0.0) || sigma_interp > cfg.sigma * (1.0 + 1e-12) {
        return Err(invalid(format!("interpolation noise {sigma_interp} must lie in (0, sigma = {}]", cfg.sigma)));
    }
    let d = a.len();
    let z = rng.normals(d);
    let mut w: Vec<f64> = (0..d).map(|j| (1.0 - lambda) * a[j] + lambda * b[j] + sigma_interp * z[j]).collect();
    let mut rngs = [rng.clone()];
    anneal_chunk(drift, &mut w, d, sigma_interp, cfg.n2, cfg.final_denoise, &mut rngs, 0, 0, &no_projection)?;
    *rng = rngs[0].clone();
    Ok(w)
}
