//! Experiment configuration and the commands behind the `sbridge` binary.
//!
//! Every command reads an [`ExperimentConfig`], writes its artifacts under
//! the configured output directory and returns what it wrote, so the binary
//! stays a thin argument parser.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bridge::{self, BridgeConfig, DriftModel, DriftSource, ExactDrift, LearnedDrift};
use crate::error::{dim, invalid, Error, Result};
use crate::eval::{self, FieldGrid, GridSpec, KdeGrid, ModeReport, W2};
use crate::io;
use crate::matrix::Matrix;
use crate::ratio::{self, RatioModel};
use crate::reference::GaussianMixture;
use crate::rng::{stream_id, tags, Rng};
use crate::score::{self, ScoreModel};
use crate::train::{write_loss_trace, Architecture, TrainConfig};

pub const PRESETS: [&str; 3] = ["six-modes", "gauss-1d", "matched-variance"];

pub const SCORE_CHECKPOINT: &str = "score.sbnn";
pub const RATIO_CHECKPOINT: &str = "ratio.sbnn";

/// Integration settings. Noise scales and the seed live on the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub final_denoise: bool,
    pub drift_source: DriftSource,
    /// Particles drawn by `sample` unless the command line says otherwise.
    pub samples: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self { n1: 1000, n2: 1000, n3: 1, final_denoise: false, drift_source: DriftSource::Learned, samples: 5000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// A preset target name or the path of a mixture file.
    pub target: String,
    pub sigma: f64,
    pub tau: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Training points drawn from the target.
    pub data_size: usize,
    pub score: TrainConfig,
    pub score_net: Architecture,
    pub ratio: TrainConfig,
    pub ratio_net: Architecture,
    pub sampler: SamplerSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset("six-modes").expect("built-in preset")
    }
}

impl ExperimentConfig {
    /// Built-in experiments.
    ///
    /// * `six-modes`: six Gaussians on a circle of radius 5, sigma 1, tau 5.
    /// * `gauss-1d`: standard normal on the line, sigma 1, tau 2.
    /// * `matched-variance`: `N(0, (tau - sigma^2) I)` in 2D, for which the
    ///   density ratio is identically one.
    pub fn preset(name: &str) -> Result<Self> {
        let six = Self {
            target: "six-modes".into(),
            sigma: 1.0,
            tau: 5.0,
            seed: 0,
            out: PathBuf::from("runs/six-modes"),
            data_size: 50_000,
            score: TrainConfig::score_2d(),
            score_net: Architecture::score_2d(),
            ratio: TrainConfig::ratio_2d(),
            ratio_net: Architecture::ratio_2d(),
            sampler: SamplerSettings::default(),
        };
        let small = Architecture { hidden: vec![64, 128], embed_dim: 16 };
        match name {
            "six-modes" => Ok(six),
            "gauss-1d" => Ok(Self {
                target: "gauss-1d".into(),
                tau: 2.0,
                out: PathBuf::from("runs/gauss-1d"),
                score: TrainConfig { iterations: 10_000, ..TrainConfig::score_2d() },
                score_net: small.clone(),
                ratio: TrainConfig { iterations: 10_000, ..TrainConfig::ratio_2d() },
                ratio_net: Architecture { embed_dim: 0, ..small },
                ..six
            }),
            "matched-variance" => Ok(Self {
                target: "matched-variance".into(),
                out: PathBuf::from("runs/matched-variance"),
                ratio: TrainConfig { iterations: 5_000, ..TrainConfig::ratio_2d() },
                ..six
            }),
            other => Err(invalid(format!("unknown preset {other:?}; known: {}", PRESETS.join(", ")))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("config: {e}")))
    }

    /// Read a config file. A relative mixture path is taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if !PRESETS.contains(&cfg.target.as_str()) {
            let t = Path::new(&cfg.target);
            if t.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.target = dir.join(t).to_string_lossy().into_owned();
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() || !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid(format!("need sigma, tau > 0; got {}, {}", self.sigma, self.tau)));
        }
        if self.data_size == 0 {
            return Err(invalid("data_size must be at least 1"));
        }
        self.score.validate()?;
        self.ratio.validate()?;
        self.bridge().validate()
    }

    pub fn target_mixture(&self) -> Result<GaussianMixture> {
        match self.target.as_str() {
            "six-modes" => Ok(GaussianMixture::six_modes()),
            "gauss-1d" => GaussianMixture::gaussian(vec![0.0], 1.0),
            "matched-variance" => {
                let v = self.tau - self.sigma * self.sigma;
                if !(v > 0.0) {
                    return Err(invalid("matched-variance target needs tau > sigma^2"));
                }
                GaussianMixture::gaussian(vec![0.0, 0.0], v)
            }
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("target file {path}: {e}")))?;
                toml::from_str(&text).map_err(|e| Error::Format(format!("target file {path}: {e}")))
            }
        }
    }

    pub fn bridge(&self) -> BridgeConfig {
        BridgeConfig {
            sigma: self.sigma,
            tau: self.tau,
            n1: self.sampler.n1,
            n2: self.sampler.n2,
            n3: self.sampler.n3,
            seed: self.seed,
            final_denoise: self.sampler.final_denoise,
            drift_source: self.sampler.drift_source,
        }
    }

    pub fn score_train(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.score.clone() }
    }

    pub fn ratio_train(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.ratio.clone() }
    }

    /// The training set: `data_size` target draws from the data stream.
    pub fn training_data(&self, target: &GaussianMixture) -> Matrix {
        target.sample(self.data_size, &mut Rng::with_stream(self.seed, stream_id(tags::DATA, 0)))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Subtract the per-coordinate mean. Returns the centered data and the mean.
pub fn center_data(data: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    if data.rows() == 0 {
        return Err(invalid("cannot center an empty data set"));
    }
    let mean = data.mean_row();
    let mut out = data.clone();
    for i in 0..out.rows() {
        for (v, m) in out.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    Ok((out, mean))
}

/// Add `mean` back to every row.
pub fn uncenter(x: &mut Matrix, mean: &[f64]) {
    for i in 0..x.rows() {
        for (v, m) in x.row_mut(i).iter_mut().zip(mean) {
            *v += m;
        }
    }
}

fn save_atomically(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("partial");
    let r = write(&tmp).and_then(|_| std::fs::rename(&tmp, path).map_err(Error::from));
    if r.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    r
}

fn keep_trace_on_divergence<T>(r: Result<T>, trace_path: &Path) -> Result<T> {
    if let Err(Error::Diverged { trace, .. }) = &r {
        write_loss_trace(trace_path, trace)?;
    }
    r
}

/// Train the score network. Writes the checkpoint and `score_loss.csv`.
pub fn cmd_train_score(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let target = cfg.target_mixture()?;
    std::fs::create_dir_all(&cfg.out)?;
    let (data, mean) = center_data(&cfg.training_data(&target))?;
    let trace_path = cfg.path("score_loss.csv");
    let trained = keep_trace_on_divergence(
        score::train_score(&data, cfg.sigma, &cfg.score_train(), &cfg.score_net),
        &trace_path,
    )?;
    write_loss_trace(&trace_path, &trained.loss_trace)?;
    let mut model = trained.model;
    model.data_mean = mean;
    let path = cfg.path(SCORE_CHECKPOINT);
    save_atomically(&path, |p| model.save(p))?;
    Ok(path)
}

/// Train the density-ratio network. Writes the checkpoint and `ratio_loss.csv`.
pub fn cmd_train_ratio(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let target = cfg.target_mixture()?;
    std::fs::create_dir_all(&cfg.out)?;
    let (data, mean) = center_data(&cfg.training_data(&target))?;
    let trace_path = cfg.path("ratio_loss.csv");
    let trained = keep_trace_on_divergence(
        ratio::train_ratio(&data, cfg.sigma, cfg.tau, &cfg.ratio_train(), &cfg.ratio_net),
        &trace_path,
    )?;
    write_loss_trace(&trace_path, &trained.loss_trace)?;
    let mut model = trained.model;
    model.data_mean = mean;
    let path = cfg.path(RATIO_CHECKPOINT);
    save_atomically(&path, |p| model.save(p))?;
    Ok(path)
}

/// Drift ingredients for a run, with the offset that maps the sampler's
/// coordinates back to data coordinates.
pub enum Drifts {
    Learned { ratio: Option<RatioModel>, score: ScoreModel },
    Exact(ExactDrift),
}

impl Drifts {
    /// Closed-form drifts from the configured target.
    pub fn exact(cfg: &ExperimentConfig, monte_carlo: bool) -> Result<Self> {
        let target = cfg.target_mixture()?;
        Ok(Drifts::Exact(if monte_carlo {
            ExactDrift::monte_carlo(target, cfg.sigma, cfg.tau)
        } else {
            ExactDrift::new(target, cfg.sigma, cfg.tau)
        }))
    }

    /// Trained checkpoints from the output directory. The ratio network is
    /// only loaded when stage 1 will run.
    pub fn learned(cfg: &ExperimentConfig, need_ratio: bool) -> Result<Self> {
        let load_err = |p: &Path, e: Error| invalid(format!("checkpoint {}: {e}", p.display()));
        let sp = cfg.path(SCORE_CHECKPOINT);
        let score = ScoreModel::load(&sp).map_err(|e| load_err(&sp, e))?;
        let ratio = if need_ratio {
            let rp = cfg.path(RATIO_CHECKPOINT);
            let r = RatioModel::load(&rp).map_err(|e| load_err(&rp, e))?;
            if r.data_mean.iter().zip(&score.data_mean).any(|(a, b)| (a - b).abs() > 1e-9) {
                return Err(invalid("ratio and score checkpoints were trained on differently centered data"));
            }
            Some(r)
        } else {
            None
        };
        Ok(Drifts::Learned { ratio, score })
    }

    /// Pick exact or learned drifts following the config and the override flag.
    pub fn for_run(cfg: &ExperimentConfig, exact: bool, need_ratio: bool) -> Result<Self> {
        match (exact, cfg.sampler.drift_source) {
            (true, DriftSource::ExactMonteCarlo) | (false, DriftSource::ExactMonteCarlo) => Self::exact(cfg, true),
            (true, _) | (false, DriftSource::Exact) => Self::exact(cfg, false),
            (false, DriftSource::Learned) => Self::learned(cfg, need_ratio),
        }
    }

    pub fn model(&self) -> Box<dyn DriftModel + '_> {
        match self {
            Drifts::Learned { ratio, score } => Box::new(LearnedDrift { ratio: ratio.as_ref(), score }),
            Drifts::Exact(e) => Box::new(e.clone()),
        }
    }

    /// Offset added to sampler output to return to data coordinates.
    pub fn data_mean(&self) -> Vec<f64> {
        match self {
            Drifts::Learned { score, .. } => score.data_mean.clone(),
            Drifts::Exact(e) => vec![0.0; e.target.dim()],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleOptions {
    pub n: usize,
    /// Stop after stage 1 (samples approximate `q_sigma`).
    pub stage1_only: bool,
    /// Start stage 2 from `N(0, tau I)` instead of running stage 1.
    pub skip_stage1: bool,
    /// Use closed-form drifts of the configured target.
    pub exact_drifts: bool,
    /// Dump every k-th step's positions.
    pub dump_every: Option<usize>,
}

/// Run the sampler. Writes `samples.csv`, `samples.bin` and, when asked,
/// `trajectory.csv`; returns the samples in data coordinates.
pub fn cmd_sample(cfg: &ExperimentConfig, opts: &SampleOptions) -> Result<Matrix> {
    cfg.validate()?;
    if opts.stage1_only && opts.skip_stage1 {
        return Err(invalid("--stage1-only and --skip-stage1 exclude each other"));
    }
    if opts.dump_every == Some(0) {
        return Err(invalid("trajectory interval must be at least 1"));
    }
    let drifts = Drifts::for_run(cfg, opts.exact_drifts, !opts.skip_stage1)?;
    let model = drifts.model();
    let bcfg = cfg.bridge();
    model.check(&bcfg)?;
    let (mut x, traj) = match (opts.stage1_only, opts.skip_stage1, opts.dump_every) {
        (true, _, None) => (bridge::run_stage1(&*model, opts.n, &bcfg)?.positions, None),
        (true, _, Some(k)) => {
            let (b, t) = bridge::run_stage1_with_trajectory(&*model, opts.n, &bcfg, k)?;
            (b.positions, Some(t))
        }
        (false, true, None) => (bridge::sample_skip_stage1(&*model, opts.n, &bcfg)?, None),
        (false, true, Some(k)) => {
            let start = bridge::reference_start(opts.n, model.dim(), &bcfg)?;
            let (b, t) = bridge::run_stage2_with_trajectory(&*model, start, &bcfg, k)?;
            (b.positions, Some(t))
        }
        (false, false, None) => (bridge::sample(&*model, opts.n, &bcfg)?, None),
        (false, false, Some(k)) => {
            let (x, t) = bridge::sample_with_trajectory(&*model, opts.n, &bcfg, k)?;
            (x, Some(t))
        }
    };
    let mean = drifts.data_mean();
    uncenter(&mut x, &mean);
    std::fs::create_dir_all(&cfg.out)?;
    io::save_samples(&cfg.path("samples"), &x)?;
    if let Some(mut t) = traj {
        for f in &mut t.frames {
            uncenter(&mut f.2, &mean);
        }
        io::write_trajectory_csv(std::fs::File::create(cfg.path("trajectory.csv"))?, &t)?;
    }
    Ok(x)
}

/// Sample quality against the target.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    /// Samples against a fresh target draw of the same size.
    pub w2: W2,
    /// Two independent target draws of the same size against each other.
    pub w2_baseline: W2,
    pub energy: f64,
    pub energy_baseline: f64,
    pub modes: Option<ModeReport>,
}

impl EvalReport {
    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let method = |w: &W2| match w.method {
            eval::W2Method::Exact => "exact".to_string(),
            eval::W2Method::Sliced { projections } => format!("sliced-{projections}"),
        };
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "w2 = {:.6}", self.w2.value);
        let _ = writeln!(s, "w2_method = {}", method(&self.w2));
        let _ = writeln!(s, "w2_baseline = {:.6}", self.w2_baseline.value);
        let _ = writeln!(s, "energy = {:.6}", self.energy);
        let _ = writeln!(s, "energy_baseline = {:.6}", self.energy_baseline);
        if let Some(m) = &self.modes {
            let _ = writeln!(s, "mode_radius = {}", m.radius);
            let f: Vec<String> = m.fractions.iter().map(|f| format!("{f:.4}")).collect();
            let _ = writeln!(s, "mode_fractions = {}", f.join(","));
            let _ = writeln!(s, "modes_missed = {}", m.missed.len());
            let _ = writeln!(s, "unassigned = {}", m.unassigned);
        }
        s
    }
}

/// Compare samples with the target. Mode coverage is reported for
/// mixtures with more than one component. Writes `eval.txt`.
pub fn cmd_eval(cfg: &ExperimentConfig, samples: &Matrix, radius: f64) -> Result<EvalReport> {
    let target = cfg.target_mixture()?;
    if samples.cols() != target.dim() {
        return Err(dim(format!("samples have {} columns, target {}", samples.cols(), target.dim())));
    }
    let n = samples.rows();
    if n < 2 {
        return Err(invalid("evaluation needs at least two samples"));
    }
    let draw = |k: u32| target.sample(n, &mut Rng::with_stream(cfg.seed, stream_id(tags::EVAL, k)));
    let (r0, r1, r2) = (draw(0), draw(1), draw(2));
    let mut rng = Rng::with_stream(cfg.seed, stream_id(tags::EVAL, 3));
    let w2 = eval::wasserstein2(samples, &r0, &mut rng)?;
    let w2_baseline = eval::wasserstein2(&r1, &r2, &mut rng)?;
    let modes = if target.n_components() > 1 { Some(eval::mode_coverage(samples, &target, radius)?) } else { None };
    let report = EvalReport {
        n,
        w2,
        w2_baseline,
        energy: eval::energy_distance(samples, &r0)?,
        energy_baseline: eval::energy_distance(&r1, &r2)?,
        modes,
    };
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.path("eval.txt"), report.to_text())?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldOptions {
    /// 1 or 2.
    pub stage: u8,
    pub t: f64,
    pub grid: GridSpec,
    pub exact_drifts: bool,
    /// Monte-Carlo draws per node for the learned stage-1 drift.
    pub mc_draws: usize,
}

/// Drift of one stage at time `t` on a grid in data coordinates. Writes
/// `field_stage{1,2}.csv` with header `x,y,u,v`.
pub fn cmd_field(cfg: &ExperimentConfig, opts: &FieldOptions) -> Result<FieldGrid> {
    cfg.validate()?;
    let drifts = Drifts::for_run(cfg, opts.exact_drifts, opts.stage == 1)?;
    let model = drifts.model();
    if model.dim() != 2 {
        return Err(dim("velocity fields are two-dimensional"));
    }
    let mean = drifts.data_mean();
    let mut bcfg = cfg.bridge();
    bcfg.n3 = opts.mc_draws.max(1);
    model.check(&bcfg)?;
    let to_model = |x: &Matrix| {
        let mut y = x.clone();
        let neg: Vec<f64> = mean.iter().map(|m| -m).collect();
        uncenter(&mut y, &neg);
        y
    };
    let field = match opts.stage {
        1 => eval::drift_field(
            |t, x| {
                let mut rngs: Vec<Rng> =
                    (0..x.rows()).map(|i| Rng::with_stream(cfg.seed, stream_id(tags::EVAL, 100 + i as u32))).collect();
                bridge::stage1_drift_batch(&*model, &to_model(x), t, &bcfg, &mut rngs)
            },
            opts.t,
            opts.grid,
        )?,
        2 => {
            if !(0.0..=1.0).contains(&opts.t) {
                return Err(invalid(format!("time must lie in [0, 1], got {}", opts.t)));
            }
            eval::drift_field(|t, x| model.score(&to_model(x), (1.0 - t).sqrt() * cfg.sigma), opts.t, opts.grid)?
        }
        s => return Err(invalid(format!("stage must be 1 or 2, got {s}"))),
    };
    std::fs::create_dir_all(&cfg.out)?;
    field.save_csv(&cfg.path(&format!("field_stage{}.csv", opts.stage)))?;
    Ok(field)
}

/// Gaussian KDE of 2D samples. `bandwidth` is an isotropic kernel std;
/// Scott's rule when absent. Writes `kde.csv` and `kde.ppm`.
pub fn cmd_kde(out: &Path, samples: &Matrix, grid: GridSpec, bandwidth: Option<f64>) -> Result<KdeGrid> {
    let bw = match bandwidth {
        Some(h) if h > 0.0 => Some([h * h, 0.0, h * h]),
        Some(h) => return Err(invalid(format!("bandwidth must be positive, got {h}"))),
        None => None,
    };
    let k = eval::kde(samples, grid, bw)?;
    std::fs::create_dir_all(out)?;
    k.write_csv(std::fs::File::create(out.join("kde.csv"))?)?;
    k.write_ppm(std::fs::File::create(out.join("kde.ppm"))?)?;
    Ok(k)
}

/// Complete `count` draws of a partially observed point. `mask` marks
/// observed coordinates with 1. Writes `inpaint.csv`.
pub fn cmd_inpaint(
    cfg: &ExperimentConfig,
    observed: &[f64],
    mask: &[f64],
    count: usize,
    exact: bool,
) -> Result<Matrix> {
    cfg.validate()?;
    let drifts = Drifts::for_run(cfg, exact, false)?;
    let model = drifts.model();
    let mean = drifts.data_mean();
    if observed.len() != mean.len() {
        return Err(dim(format!("observation has {} coordinates, model {}", observed.len(), mean.len())));
    }
    let centered: Vec<f64> = observed.iter().zip(&mean).map(|(v, m)| v - m).collect();
    let task = bridge::InpaintTask::new(&centered, mask, cfg.bridge())?;
    let mut out = Matrix::zeros(count, mean.len());
    for k in 0..count {
        let mut rng = Rng::with_stream(cfg.seed, stream_id(tags::INPAINT, k as u32));
        let x = bridge::inpaint(&task, &*model, &mut rng)?;
        for j in 0..x.len() {
            // observed coordinates are copied so they survive the offset exactly
            out.set(k, j, if mask[j] == 1.0 { observed[j] } else { x[j] + mean[j] });
        }
    }
    std::fs::create_dir_all(&cfg.out)?;
    io::write_samples_csv(std::fs::File::create(cfg.path("inpaint.csv"))?, &out)?;
    Ok(out)
}

/// Blend two points at each `lambda`, perturb with noise `noise` and anneal
/// back with stage 2. Writes `interpolate.csv` (`lambda,x0,...`).
pub fn cmd_interpolate(
    cfg: &ExperimentConfig,
    a: &[f64],
    b: &[f64],
    lambdas: &[f64],
    noise: f64,
    exact: bool,
) -> Result<Matrix> {
    cfg.validate()?;
    let drifts = Drifts::for_run(cfg, exact, false)?;
    let model = drifts.model();
    let mean = drifts.data_mean();
    if a.len() != mean.len() || b.len() != mean.len() {
        return Err(dim("endpoints must match the model dimension"));
    }
    let ca: Vec<f64> = a.iter().zip(&mean).map(|(v, m)| v - m).collect();
    let cb: Vec<f64> = b.iter().zip(&mean).map(|(v, m)| v - m).collect();
    let bcfg = cfg.bridge();
    let d = mean.len();
    let mut out = Matrix::zeros(lambdas.len(), d);
    for (k, &lambda) in lambdas.iter().enumerate() {
        let mut rng = Rng::with_stream(cfg.seed, stream_id(tags::INTERPOLATE, k as u32));
        let w = bridge::interpolate(&ca, &cb, lambda, noise, &*model, &bcfg, &mut rng)?;
        for j in 0..d {
            out.set(k, j, w[j] + mean[j]);
        }
    }
    std::fs::create_dir_all(&cfg.out)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(cfg.path("interpolate.csv"))?);
    let cols: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    writeln!(f, "lambda,{}", cols.join(","))?;
    for (k, lambda) in lambdas.iter().enumerate() {
        let row: Vec<String> = out.row(k).iter().map(|v| format!("{v:e}")).collect();
        writeln!(f, "{lambda},{}", row.join(","))?;
    }
    f.flush()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg, "{name}:\n{text}");
        }
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn partial_config_fills_defaults_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::from_toml("tau = 3.0\n[sampler]\nn1 = 10\n").unwrap();
        assert_eq!((cfg.tau, cfg.sampler.n1, cfg.sampler.n2), (3.0, 10, 1000));
        assert_eq!(cfg.target, "six-modes");
        assert!(ExperimentConfig::from_toml("tua = 3.0").is_err());
        assert!(ExperimentConfig::from_toml("[score]\nseed = 4").is_err());
        assert!(ExperimentConfig::from_toml("sigma = -1.0").is_err());
    }

    #[test]
    fn seed_reaches_every_consumer() {
        let cfg = ExperimentConfig { seed: 9, ..Default::default() };
        assert_eq!((cfg.score_train().seed, cfg.ratio_train().seed, cfg.bridge().seed), (9, 9, 9));
    }

    #[test]
    fn centering_cases() {
        let c = Matrix::from_fn(4, 2, |_, j| 3.0 - j as f64);
        let (z, m) = center_data(&c).unwrap();
        assert_eq!(m, vec![3.0, 2.0]);
        assert!(z.data().iter().all(|&v| v == 0.0));

        let sym = Matrix::new(2, 2, vec![1.0, -2.0, -1.0, 2.0]).unwrap();
        let (z, m) = center_data(&sym).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-12));
        assert!(z.data().iter().zip(sym.data()).all(|(a, b)| (a - b).abs() < 1e-12));

        let mut rng = Rng::new(4);
        let x = Matrix::from_fn(50, 3, |_, _| rng.normal() + 7.0);
        let (mut z, m) = center_data(&x).unwrap();
        uncenter(&mut z, &m);
        assert!(z.data().iter().zip(x.data()).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(center_data(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn matched_variance_target_has_unit_ratio() {
        let cfg = ExperimentConfig::preset("matched-variance").unwrap();
        let g = cfg.target_mixture().unwrap();
        let f = crate::reference::density_ratio_exact(&g, cfg.sigma, cfg.tau, &[1.0, -2.0]).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_target_file_is_an_error() {
        let cfg = ExperimentConfig { target: "/nonexistent/mixture.toml".into(), ..Default::default() };
        assert!(cfg.target_mixture().is_err());
    }
}
