//! Denoising score matching on a 1D standard normal. The smoothed score is
//! known exactly, `-x / (1 + s^2)` at noise level `s`, so the fit can be read
//! off directly.
//!
//!     cargo run --release --example score_training [iterations]

use sbridge::score::train_score;
use sbridge::train::moving_average;
use sbridge::{Architecture, GaussianMixture, Rng, TrainConfig};

fn main() -> sbridge::Result<()> {
    let iterations = std::env::args().nth(1).map_or(5000, |s| s.parse().expect("iteration count"));
    let sigma = 1.0;
    let data = GaussianMixture::gaussian(vec![0.0], 1.0)?.sample(20_000, &mut Rng::new(0));
    let cfg = TrainConfig { iterations, lr: 1e-3, ..TrainConfig::score_2d() };
    let arch = Architecture { hidden: vec![64, 64], embed_dim: 16 };
    let trained = train_score(&data, sigma, &cfg, &arch)?;

    let smooth = moving_average(&trained.loss_trace, 200);
    for k in [0, iterations / 4, iterations / 2, iterations - 1] {
        println!("iteration {:6}  loss (200-step average) {:.4}", k + 1, smooth[k]);
    }
    for level in [0.1, 0.5, 1.0] {
        let mse: f64 = (0..61)
            .map(|i| {
                let x = -3.0 + 0.1 * i as f64;
                let s = trained.model.estimate(&[x], level).unwrap()[0];
                (s + x / (1.0 + level * level)).powi(2)
            })
            .sum::<f64>()
            / 61.0;
        println!("noise level {level}: MSE against the exact score on [-3, 3] = {mse:.2e}");
    }
    Ok(())
}
