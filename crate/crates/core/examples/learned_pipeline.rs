//! Full learned pipeline on the six-mode target: train the ratio and score
//! networks, run both stages, report mode coverage.
//!
//!     cargo run --release --example learned_pipeline [iterations] [particles]
//!
//! Small networks keep this to a few minutes on one core; the presets in
//! `ExperimentConfig` use the full-size ones.

use sbridge::bridge::sample;
use sbridge::eval::{mode_coverage, wasserstein2_exact};
use sbridge::experiment::center_data;
use sbridge::ratio::train_ratio;
use sbridge::rng::{stream_id, tags};
use sbridge::score::train_score;
use sbridge::{Architecture, BridgeConfig, GaussianMixture, LearnedDrift, Rng, TrainConfig};

fn main() -> sbridge::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().map_or(5000, |s| s.parse().expect("iteration count"));
    let n = args.next().map_or(2000, |s| s.parse().expect("particle count"));
    let (sigma, tau) = (1.0, 5.0);
    let g = GaussianMixture::six_modes();
    let (data, mean) = center_data(&g.sample(50_000, &mut Rng::with_stream(0, stream_id(tags::DATA, 0))))?;

    let t = std::time::Instant::now();
    let ratio = train_ratio(
        &data,
        sigma,
        tau,
        &TrainConfig { iterations, ..TrainConfig::ratio_2d() },
        &Architecture { hidden: vec![64, 128], embed_dim: 0 },
    )?;
    let score = train_score(
        &data,
        sigma,
        &TrainConfig { iterations, ..TrainConfig::score_2d() },
        &Architecture { hidden: vec![64, 128], embed_dim: 16 },
    )?;
    println!("trained both networks in {:.0?}", t.elapsed());

    let cfg = BridgeConfig { sigma, tau, ..Default::default() };
    let mut x = sample(&LearnedDrift::new(&ratio.model, &score.model), n, &cfg)?;
    sbridge::experiment::uncenter(&mut x, &mean);
    let r = mode_coverage(&x, &g, 1.0)?;
    println!("mode fractions {:?}", r.fractions);
    println!("missed modes {:?}, outside every mode {}", r.missed, r.unassigned);
    let reference = g.sample(n, &mut Rng::new(1));
    println!("W2 to a target draw {:.4}", wasserstein2_exact(&x, &reference)?);
    Ok(())
}
