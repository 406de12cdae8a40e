mod commands;
mod manifest;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use localte::density::RPolicy;
use localte::localmodel::LocalModel;
use localte::transfer::{EmbedConfig, TeConfig};

/// Transfer entropy between time series from nearest-neighbour local models.
#[derive(Parser)]
#[command(name = "localte", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for noise and surrogates.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a system and write its channels as CSV.
    Simulate(SimulateArgs),
    /// Transfer entropy in both directions between two columns of a CSV file.
    Estimate(EstimateArgs),
    /// Coupled tent maps over an (eps, mu) grid.
    Sweep(SweepArgs),
    /// Pairwise transfer entropy matrix and net flow per channel.
    Netflow(NetflowArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum System {
    Tent,
    Coupled,
    Chua,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    system: System,
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Discarded iterates (maps) or integration steps (chua).
    #[arg(long)]
    transient: Option<usize>,
    /// Tent apex, 0 < a < 1.
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = localte::systems::DEFAULT_SEEDS.0)]
    x0: f64,
    #[arg(long, default_value_t = localte::systems::DEFAULT_SEEDS.1)]
    y0: f64,
    #[arg(long, default_value_t = 9.0)]
    alpha: f64,
    #[arg(long, default_value_t = 100.0 / 7.0)]
    beta: f64,
    #[arg(long, default_value_t = -8.0 / 7.0, allow_hyphen_values = true)]
    m0: f64,
    #[arg(long, default_value_t = -5.0 / 7.0, allow_hyphen_values = true)]
    m1: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Integration steps per recorded sample.
    #[arg(long, default_value_t = 5)]
    stride: usize,
    /// Initial chua state v1,v2,il.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.1, 0.0, 0.0], allow_hyphen_values = true)]
    state0: Vec<f64>,
    /// Gaussian measurement noise, as a fraction of each channel's std.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    #[value(name = "0")]
    Zero,
    #[value(name = "1")]
    First,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Matched,
    Inverse,
    Fixed,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Embedding dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Embedding delay.
    #[arg(long, default_value_t = 1)]
    tau: usize,
    /// Neighbours averaged by the zero-order model.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum, default_value = "0")]
    order: OrderArg,
    /// Neighbours for the first-order fit (default 2(d+1)).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value = "matched")]
    r_policy: PolicyArg,
    /// Constant c for the inverse and fixed policies.
    #[arg(long)]
    r_coef: Option<f64>,
    /// Temporal exclusion window.
    #[arg(long, default_value_t = 0)]
    window: usize,
    /// z-score channels before embedding.
    #[arg(long)]
    standardize: bool,
    /// Field delimiter of the input file.
    #[arg(long, default_value = ",")]
    delimiter: char,
}

impl EstimatorArgs {
    fn resolve(&self, default_dim: usize) -> Result<(EmbedConfig, TeConfig)> {
        let policy = match (self.r_policy, self.r_coef) {
            (PolicyArg::Matched, None) => RPolicy::Matched,
            (PolicyArg::Matched, Some(_)) => bail!("--r-coef is not used by --r-policy matched"),
            (PolicyArg::Inverse, Some(c)) => RPolicy::Inverse { c },
            (PolicyArg::Fixed, Some(c)) => RPolicy::Fixed { c },
            (_, None) => bail!("--r-policy inverse and fixed need --r-coef"),
        };
        let model = match self.order {
            OrderArg::Zero => {
                if self.m.is_some() {
                    bail!("--m applies to --order 1 only");
                }
                LocalModel::zero_order(self.k, self.window)
            }
            OrderArg::First => LocalModel::first_order(self.m, self.window),
        };
        let embed = EmbedConfig {
            dim: self.d.unwrap_or(default_dim),
            tau: self.tau,
            standardize: self.standardize,
        };
        Ok((embed, TeConfig { model, policy, keep_per_sample: false }))
    }

    fn delimiter(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(|b| b.is_ascii())
            .with_context(|| format!("delimiter {:?} is not a single ASCII byte", self.delimiter))
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    source: String,
    #[arg(long)]
    target: String,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Write per-sample log-ratios of both directions to this CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Also compare against this many cyclically shifted surrogates.
    #[arg(long)]
    surrogates: Option<usize>,
    /// Write the report as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 0.0)]
    eps_min: f64,
    #[arg(long, default_value_t = 1.0)]
    eps_max: f64,
    #[arg(long, default_value_t = 11)]
    eps_steps: usize,
    #[arg(long, default_value_t = 0.0)]
    mu_min: f64,
    #[arg(long, default_value_t = 1.0)]
    mu_max: f64,
    #[arg(long, default_value_t = 11)]
    mu_steps: usize,
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = localte::systems::MAP_TRANSIENT)]
    transient: usize,
    #[arg(long, default_value_t = localte::systems::DEFAULT_SEEDS.0)]
    x0: f64,
    #[arg(long, default_value_t = localte::systems::DEFAULT_SEEDS.1)]
    y0: f64,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NetflowArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let ctx = commands::Context {
        seed: cli.seed,
        threads: rayon::current_num_threads(),
        argv: std::env::args().collect::<Vec<_>>().join(" "),
    };
    match &cli.command {
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Estimate(a) => commands::estimate(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Netflow(a) => commands::netflow(&ctx, a),
    }
}
