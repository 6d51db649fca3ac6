//! `jumpdens`: simulate jump diffusions, evaluate transition densities, tail
//! bounds and density envelopes, and write CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 config or input error, 2 containment violation,
//! 3 numeric failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "jumpdens", version, about = "Transition densities and density envelopes of jump diffusions")]
struct Cli {
    /// Worker threads. Results do not depend on it.
    #[arg(long, env = "JUMPDENS_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate terminal values X_t of the model.
    Simulate(SimulateArgs),
    /// Transition density on a grid of offsets y - x.
    Density(DensityArgs),
    /// Tail bound and tail-driven density envelope against distance.
    Bounds(BoundsArgs),
    /// Fit envelope constants to reference densities.
    Calibrate(CalibrateArgs),
    /// Check a density curve against an envelope set.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Model config (TOML).
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    t: f64,
    /// Start point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    #[arg(long)]
    paths: Option<usize>,
    /// Total Euler steps (default: ceil(steps_per_unit * t)).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DensityMethod {
    Closed,
    Fft,
    Kde,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    t: f64,
    /// Offsets `lo:hi:n` (radii for multivariate series).
    #[arg(long, default_value = "-6:6:241", allow_hyphen_values = true)]
    grid: String,
    /// Series truncation tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "closed")]
    method: DensityMethod,
    /// Start point for kde.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed kde bandwidth (default: Silverman).
    #[arg(long)]
    bandwidth: Option<f64>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 10.0)]
    rmax: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Constant of the tail-driven envelope.
    #[arg(long, default_value_t = 1.0)]
    cqt: f64,
    /// Envelope set; supplies C_qT and q and adds its two-sided envelopes.
    #[arg(long)]
    envelopes: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1")]
    times: Vec<f64>,
    #[arg(long, default_value = "-8:8:321", allow_hyphen_values = true)]
    grid: String,
    #[arg(long, default_value_t = 1.1)]
    safety: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long)]
    tol: Option<f64>,
    /// Paths per time for kde references (non-linear models).
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    /// Envelope set JSON.
    #[arg(long)]
    envelopes: PathBuf,
    /// Density curve CSV (with its JSON sidecar).
    #[arg(long)]
    curve: PathBuf,
    /// Confidence half-widths of slack for statistical curves.
    #[arg(long, default_value_t = 3.0)]
    slack: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(commands::EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: thread count must be positive");
            return ExitCode::from(commands::EXIT_CONFIG);
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Density(a) => commands::density(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Check(a) => commands::check(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
