//! Complete the missing coordinate of a partially observed point. The
//! observed coordinate is re-imposed after every step and comes back
//! unchanged.
//!
//!     cargo run --release --example inpainting

use sbridge::bridge::{inpaint, InpaintTask};
use sbridge::{BridgeConfig, ExactDrift, GaussianMixture, Rng};

fn main() -> sbridge::Result<()> {
    let g = GaussianMixture::six_modes();
    let cfg = BridgeConfig::default();
    let drift = ExactDrift::new(g, cfg.sigma, cfg.tau);
    // y = 4.33 is shared by the modes at 60 and 120 degrees (x = +-2.5)
    let task = InpaintTask::new(&[0.0, 4.33], &[0.0, 1.0], cfg)?;
    let mut rng = Rng::new(5);
    for _ in 0..8 {
        let x = inpaint(&task, &drift, &mut rng)?;
        println!("x = {:+.3}  y = {:.4}", x[0], x[1]);
    }
    Ok(())
}
