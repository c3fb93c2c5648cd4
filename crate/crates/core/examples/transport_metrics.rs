//! Exact and sliced 2-Wasserstein distances, energy distance and mode
//! coverage between sample sets.
//!
//!     cargo run --release --example transport_metrics [n]

use sbridge::eval::{energy_distance, mode_coverage, sliced_wasserstein2, wasserstein2_exact, SLICED_PROJECTIONS};
use sbridge::{GaussianMixture, Rng};

fn main() -> sbridge::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(1000, |s| s.parse().expect("sample count"));
    let g = GaussianMixture::six_modes();
    let mut rng = Rng::new(3);
    let a = g.sample(n, &mut rng);
    let b = g.sample(n, &mut rng);
    let blurred = g.smooth(0.5)?.sample(n, &mut rng);
    let lopsided =
        GaussianMixture::new(vec![0.5, 0.5], vec![g.means()[0].clone(), g.means()[3].clone()], vec![0.01; 2])?
            .sample(n, &mut rng);

    println!("{:<22} {:>9} {:>9} {:>9}", "vs target draw", "W2", "sliced", "energy");
    for (name, x) in [("second target draw", &b), ("blurred by 0.5", &blurred), ("two modes only", &lopsided)] {
        println!(
            "{name:<22} {:9.4} {:9.4} {:9.4}",
            wasserstein2_exact(&a, x)?,
            sliced_wasserstein2(&a, x, SLICED_PROJECTIONS, &mut rng)?,
            energy_distance(&a, x)?
        );
    }
    let r = mode_coverage(&lopsided, &g, 1.0)?;
    println!("two-mode sample: fractions {:?}, missed modes {:?}", r.fractions, r.missed);
    Ok(())
}
