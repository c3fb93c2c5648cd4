//! The config-driven workflow behind the `sbridge` binary, run in-process:
//! print a preset as TOML, then sample with closed-form drifts, evaluate and
//! draw a KDE.
//!
//!     cargo run --release --example experiment_config [preset]

use sbridge::eval::GridSpec;
use sbridge::experiment::{cmd_eval, cmd_kde, cmd_sample, SampleOptions};
use sbridge::ExperimentConfig;

fn main() -> sbridge::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "six-modes".into());
    let mut cfg = ExperimentConfig::preset(&name)?;
    cfg.out = std::env::temp_dir().join(format!("sbridge-{name}"));
    println!("{}", cfg.to_toml()?);

    let opts = SampleOptions { n: 2000, exact_drifts: true, ..Default::default() };
    let x = cmd_sample(&cfg, &opts)?;
    print!("{}", cmd_eval(&cfg, &x, 1.0)?.to_text());
    if x.cols() == 2 {
        cmd_kde(&cfg.out, &x, GridSpec::square(7.0, 141), None)?;
    }
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}
