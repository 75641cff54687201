use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hrcm::bench::{run_experiment, ExperimentConfig, Mode, XSpec};
use hrcm::compress::Estimator;
use hrcm::kernels::KernelSpec;
use hrcm::Error;

/// Hierarchical random compression for 2-D kernel summation.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write a JSON record.
    ///
    /// In single mode targets and sources are the same points and the
    /// self-interaction terms (i = j) are left out of every sum.
    /// HRCM_THREADS caps the number of worker threads.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// pair, single, census, svd-decay, gram-check or timing.
    #[arg(long)]
    mode: Mode,
    /// log2d, screened:GAMMA or helmholtz:K.
    #[arg(long, default_value = "screened:0.01")]
    kernel: KernelSpec,
    /// Points per set (4^p for single, census and timing).
    #[arg(long, default_value_t = 4096)]
    n: usize,
    /// Samples per compression (c = r = k).
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    eta: f64,
    /// Leaves hold 4^p0 points.
    #[arg(long, default_value_t = 2)]
    p0: u32,
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    realizations: usize,
    /// Side of the square box(es).
    #[arg(long, default_value_t = 8.0)]
    domain_size: f64,
    /// Center distance of the two boxes in pair, svd-decay and gram-check modes.
    #[arg(long, default_value_t = 16.0)]
    separation: f64,
    /// ones, random or file:PATH. Densities are always uniform in [0, 1).
    #[arg(long, default_value = "ones")]
    x: XSpec,
    /// sampled-least-squares, singular-triplets or monte-carlo.
    #[arg(long, default_value = "sampled-least-squares")]
    estimator: Estimator,
    /// Skip direct summation above this many points.
    #[arg(long, default_value_t = 1 << 16)]
    direct_cap: usize,
    /// Smallest exponent of the timing sweep.
    #[arg(long, default_value_t = 5)]
    timing_min_p: u32,
    #[arg(long, default_value_t = 18)]
    sigma_count: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// JSON output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the (N, K, mean, variance, t_direct, t_hrcm) table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            mode: self.mode,
            kernel: self.kernel,
            n: self.n,
            domain_size: self.domain_size,
            p0: self.p0,
            k: self.k,
            epsilon: self.epsilon,
            eta: self.eta,
            seed: self.seed,
            realizations: self.realizations,
            pair_separation: self.separation,
            x: self.x.clone(),
            estimator: self.estimator,
            direct_cap: self.direct_cap,
            timing_min_p: self.timing_min_p,
            sigma_count: self.sigma_count,
            trials: self.trials,
        }
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("HRCM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Config(format!("HRCM_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(args: &RunArgs) -> Result<(), Error> {
    configure_threads()?;
    let record = run_experiment(&args.config())?;
    let json = record.to_json()?;
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.csv {
        record.write_csv(path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = &cli.command;
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Dimension { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
