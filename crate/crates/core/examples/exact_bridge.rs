//! The two-stage sampler driven by closed-form drifts. Stage 1 should land
//! on `q_sigma`, stage 2 on the target.
//!
//!     cargo run --release --example exact_bridge [particles]

use sbridge::bridge::{run_stage1, run_stage2};
use sbridge::eval::mode_coverage;
use sbridge::{BridgeConfig, DriftSource, ExactDrift, GaussianMixture, Matrix};

fn main() -> sbridge::Result<()> {
    let n = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("particle count"));

    // 1D Gaussian target: every marginal is known.
    let s2 = 0.25;
    let cfg = BridgeConfig { sigma: 1.0, tau: 2.0, drift_source: DriftSource::Exact, ..Default::default() };
    let drift = ExactDrift::new(GaussianMixture::gaussian(vec![0.0], s2)?, cfg.sigma, cfg.tau);
    let mid = run_stage1(&drift, n, &cfg)?;
    println!("gaussian, after stage 1: var {:.4} (want {:.4})", var(&mid.positions), s2 + 1.0);
    let done = run_stage2(&drift, mid, &cfg)?;
    println!("gaussian, after stage 2: var {:.4} (want {s2})", var(&done.positions));

    // Six-mode target.
    let cfg = BridgeConfig { tau: 5.0, ..cfg };
    let g = GaussianMixture::six_modes();
    let drift = ExactDrift::new(g.clone(), cfg.sigma, cfg.tau);
    let x = sbridge::bridge::sample(&drift, n, &cfg)?;
    let r = mode_coverage(&x, &g, 1.0)?;
    println!("six modes: fractions {:?}, outside every mode {}", r.fractions, r.unassigned);
    Ok(())
}

fn var(x: &Matrix) -> f64 {
    let v = x.column(0);
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}
