//! Noisy interpolation between two modes: blend, perturb, anneal back. Each
//! blend lands on a mode instead of the empty space between them.
//!
//!     cargo run --release --example interpolation [noise]

use sbridge::bridge::interpolate;
use sbridge::{BridgeConfig, ExactDrift, GaussianMixture, Rng};

fn main() -> sbridge::Result<()> {
    let noise = std::env::args().nth(1).map_or(0.8, |s| s.parse().expect("noise std"));
    let g = GaussianMixture::six_modes();
    let cfg = BridgeConfig::default();
    let drift = ExactDrift::new(g.clone(), cfg.sigma, cfg.tau);
    let (a, b) = (g.means()[0].clone(), g.means()[2].clone());
    let mut rng = Rng::new(2);
    for k in 0..=8 {
        let lambda = k as f64 / 8.0;
        let w = interpolate(&a, &b, lambda, noise, &drift, &cfg, &mut rng)?;
        let blend: Vec<f64> = a.iter().zip(&b).map(|(p, q)| (1.0 - lambda) * p + lambda * q).collect();
        println!("lambda {lambda:.3}: blend ({:+.2}, {:+.2}) -> ({:+.2}, {:+.2})", blend[0], blend[1], w[0], w[1]);
    }
    Ok(())
}
