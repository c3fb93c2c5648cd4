//! Stage drifts on a grid, written as `x,y,u,v` CSV for plotting. Compares
//! the Monte-Carlo stage-1 estimator with its closed form.
//!
//!     cargo run --release --example velocity_field [out_dir]

use sbridge::bridge::stage1_drift_batch;
use sbridge::eval::{drift_field, field_cosine, GridSpec};
use sbridge::reference::{drift_stage1_exact, drift_stage2_exact};
use sbridge::rng::stream_id;
use sbridge::{BridgeConfig, ExactDrift, GaussianMixture, Matrix, Rng};

fn main() -> sbridge::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("sbridge-fields"), Into::into);
    std::fs::create_dir_all(&out)?;
    let g = GaussianMixture::six_modes();
    let cfg = BridgeConfig { n3: 2000, ..Default::default() };
    let grid = GridSpec::square(7.0, 29);

    let rows = |f: &dyn Fn(&[f64]) -> sbridge::Result<Vec<f64>>, x: &Matrix| {
        let mut m = Matrix::zeros(x.rows(), 2);
        for i in 0..x.rows() {
            m.row_mut(i).copy_from_slice(&f(x.row(i))?);
        }
        Ok(m)
    };
    let stage2 = drift_field(|t, x| rows(&|p| drift_stage2_exact(&g, cfg.sigma, t, p), x), 0.9, grid)?;
    stage2.save_csv(&out.join("stage2_t0.9.csv"))?;

    let exact = drift_field(|t, x| rows(&|p| drift_stage1_exact(&g, cfg.sigma, cfg.tau, t, p), x), 0.5, grid)?;
    let mc_model = ExactDrift::monte_carlo(g.clone(), cfg.sigma, cfg.tau);
    let mc = drift_field(
        |t, x| {
            let mut rngs: Vec<Rng> = (0..x.rows()).map(|i| Rng::with_stream(1, stream_id(7, i as u32))).collect();
            stage1_drift_batch(&mc_model, x, t, &cfg, &mut rngs)
        },
        0.5,
        grid,
    )?;
    exact.save_csv(&out.join("stage1_exact_t0.5.csv"))?;
    mc.save_csv(&out.join("stage1_mc_t0.5.csv"))?;
    let q = g.smooth(cfg.sigma)?;
    let peak = q.log_pdf(&g.means()[0])?;
    let cos = field_cosine(&exact, &mc, |p| q.log_pdf(&p).unwrap() >= peak + 0.01f64.ln())?;
    println!("stage-1 Monte-Carlo vs closed form, cosine on high-density nodes: {cos:.4}");
    println!("fields written to {}", out.display());
    Ok(())
}
