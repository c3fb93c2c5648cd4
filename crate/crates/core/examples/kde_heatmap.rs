//! Gaussian KDE of sampler output on a grid, saved as CSV and a PPM heatmap.
//!
//!     cargo run --release --example kde_heatmap [out_dir]

use sbridge::bridge::sample;
use sbridge::eval::{kde, GridSpec};
use sbridge::{BridgeConfig, ExactDrift, GaussianMixture};

fn main() -> sbridge::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("sbridge-kde"), Into::into);
    std::fs::create_dir_all(&out)?;
    let g = GaussianMixture::six_modes();
    let cfg = BridgeConfig::default();
    let x = sample(&ExactDrift::new(g, cfg.sigma, cfg.tau), 5000, &cfg)?;
    let k = kde(&x, GridSpec::square(7.0, 141), None)?;
    k.write_csv(std::fs::File::create(out.join("kde.csv"))?)?;
    k.write_ppm(std::fs::File::create(out.join("kde.ppm"))?)?;
    println!("Scott bandwidth (covariance entries) {:?}", k.bandwidth);
    for p in k.local_maxima(0.2) {
        println!("peak at ({:+.2}, {:+.2})", p[0], p[1]);
    }
    println!("wrote {}", out.display());
    Ok(())
}
