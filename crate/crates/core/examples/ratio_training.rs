//! Logistic density-ratio estimation: separate `q_sigma` samples from the
//! reference `N(0, tau I)` and compare the logit with the exact `log f`.
//!
//!     cargo run --release --example ratio_training [iterations] [weight_decay]

use sbridge::ratio::train_ratio;
use sbridge::reference::log_density_ratio_exact;
use sbridge::{Architecture, GaussianMixture, Rng, TrainConfig};

fn main() -> sbridge::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().map_or(3000, |s| s.parse().expect("iteration count"));
    let weight_decay = args.next().map_or(0.0, |s| s.parse().expect("weight decay"));
    let (sigma, tau) = (1.0, 5.0);
    let g = GaussianMixture::six_modes();
    let data = g.sample(50_000, &mut Rng::new(0));
    let cfg = TrainConfig { iterations, weight_decay, ..TrainConfig::ratio_2d() };
    let arch = Architecture { hidden: vec![64, 128], embed_dim: 0 };
    let trained = train_ratio(&data, sigma, tau, &cfg, &arch)?;
    println!(
        "final loss {:.4} (2 ln 2 = {:.4} for a blind classifier)",
        trained.loss_trace.last().unwrap(),
        2.0 * 2f64.ln()
    );

    let q = g.smooth(sigma)?.sample(10_000, &mut Rng::new(1));
    let learned = trained.model.logits(&q)?;
    let exact: Vec<f64> = q.iter_rows().map(|x| log_density_ratio_exact(&g, sigma, tau, x).unwrap()).collect();
    println!("corr(learned logit, log f) on q_sigma draws = {:.4}", pearson(&learned, &exact));
    Ok(())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
