use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbridge::eval::GridSpec;
use sbridge::experiment::{self, ExperimentConfig, FieldOptions, SampleOptions};
use sbridge::io::load_samples;

/// Two-stage Schrodinger bridge sampler.
#[derive(Parser)]
#[command(name = "sbridge", version)]
struct Cli {
    /// Experiment config (TOML). Without it the preset is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in experiment: six-modes, gauss-1d or matched-variance.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "SB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Grid {
    /// Grid covers [-w, w]^2.
    #[arg(long, default_value_t = 7.0)]
    half_width: f64,
    /// Nodes per axis.
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the noise-conditional score network.
    TrainScore,
    /// Train the density-ratio network.
    TrainRatio,
    /// Draw samples with the bridge sampler.
    Sample {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, conflicts_with = "skip_stage1")]
        stage1_only: bool,
        #[arg(long)]
        skip_stage1: bool,
        #[arg(long)]
        exact_drifts: bool,
        /// Dump every K-th step to trajectory.csv.
        #[arg(long, value_name = "K")]
        dump_trajectory: Option<usize>,
    },
    /// Compare a sample file with the target.
    Eval {
        samples: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// Dump a drift field on a grid.
    Field {
        #[arg(long, default_value_t = 2)]
        stage: u8,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        exact_drifts: bool,
        /// Monte-Carlo draws per node for the learned stage-1 drift.
        #[arg(long, default_value_t = 1000)]
        mc_draws: usize,
        #[command(flatten)]
        grid: Grid,
    },
    /// Kernel density estimate of a 2D sample file (CSV and PPM).
    Kde {
        samples: PathBuf,
        /// Isotropic kernel std; Scott's rule if omitted.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[command(flatten)]
        grid: Grid,
    },
    /// Complete the unobserved coordinates of a point.
    Inpaint {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        observed: Vec<f64>,
        /// 1 marks an observed coordinate.
        #[arg(long, value_delimiter = ',', required = true)]
        mask: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        exact_drifts: bool,
    },
    /// Noisy interpolation between two points.
    Interpolate {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        to: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        lambdas: Vec<f64>,
        /// Noise std added to each blend; at most sigma.
        #[arg(long)]
        noise: f64,
        #[arg(long)]
        exact_drifts: bool,
    },
}

fn grid(g: &Grid, default_nodes: usize) -> GridSpec {
    GridSpec::square(g.half_width, g.nodes.unwrap_or(default_nodes))
}

fn run(cli: Cli) -> sbridge::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| sbridge::Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => {
            return Err(sbridge::Error::InvalidArgument("give --config or --preset, not both".into()))
        }
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, name) => ExperimentConfig::preset(name.as_deref().unwrap_or("six-modes"))?,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    match cli.cmd {
        Cmd::TrainScore => println!("{}", experiment::cmd_train_score(&cfg)?.display()),
        Cmd::TrainRatio => println!("{}", experiment::cmd_train_ratio(&cfg)?.display()),
        Cmd::Sample { n, stage1_only, skip_stage1, exact_drifts, dump_trajectory } => {
            let opts = SampleOptions {
                n: n.unwrap_or(cfg.sampler.samples),
                stage1_only,
                skip_stage1,
                exact_drifts,
                dump_every: dump_trajectory,
            };
            let x = experiment::cmd_sample(&cfg, &opts)?;
            println!("{} samples -> {}", x.rows(), cfg.path("samples.{csv,bin}").display());
        }
        Cmd::Eval { samples, radius } => {
            let x = load_samples(&samples)?;
            print!("{}", experiment::cmd_eval(&cfg, &x, radius)?.to_text());
        }
        Cmd::Field { stage, t, exact_drifts, mc_draws, grid: g } => {
            let opts = FieldOptions { stage, t, grid: grid(&g, 29), exact_drifts, mc_draws };
            experiment::cmd_field(&cfg, &opts)?;
            println!("{}", cfg.path(&format!("field_stage{stage}.csv")).display());
        }
        Cmd::Kde { samples, bandwidth, grid: g } => {
            let x = load_samples(&samples)?;
            let k = experiment::cmd_kde(&cfg.out, &x, grid(&g, 141), bandwidth)?;
            println!("bandwidth = {:?}", k.bandwidth);
            println!("{}", cfg.path("kde.{csv,ppm}").display());
        }
        Cmd::Inpaint { observed, mask, count, exact_drifts } => {
            let x = experiment::cmd_inpaint(&cfg, &observed, &mask, count, exact_drifts)?;
            println!("{} completions -> {}", x.rows(), cfg.path("inpaint.csv").display());
        }
        Cmd::Interpolate { from, to, lambdas, noise, exact_drifts } => {
            experiment::cmd_interpolate(&cfg, &from, &to, &lambdas, noise, exact_drifts)?;
            println!("{}", cfg.path("interpolate.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
