//! Closed-form quantities of a Gaussian-mixture target: smoothed scores, the
//! density ratio against the reference Gaussian, and both stage drifts.
//!
//!     cargo run --release --example mixture_oracles

use sbridge::reference::{drift_stage1_exact, drift_stage2_exact, log_density_ratio_exact};
use sbridge::{GaussianMixture, Rng};

fn main() -> sbridge::Result<()> {
    let g = GaussianMixture::six_modes();
    let (sigma, tau) = (1.0, 5.0);

    let x = g.sample(5000, &mut Rng::new(1));
    println!("sample mean {:?} (mixture mean {:?})", x.mean_row(), g.mean());

    let q = g.smooth(sigma)?;
    for p in [[5.0, 0.0], [0.0, 0.0], [2.5, 4.33], [8.0, -1.0]] {
        println!(
            "x = {p:?}\n  log q_sigma {:8.3}  log f {:8.3}  D2(t=1) {:?}  D1(t=0.5) {:?}",
            q.log_pdf(&p)?,
            log_density_ratio_exact(&g, sigma, tau, &p)?,
            round(&drift_stage2_exact(&g, sigma, 1.0, &p)?),
            round(&drift_stage1_exact(&g, sigma, tau, 0.5, &p)?),
        );
    }
    Ok(())
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e3).round() / 1e3).collect()
}
