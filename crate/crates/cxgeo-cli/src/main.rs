//! Batch driver for the development pipeline: reads a TOML experiment
//! config, dispatches to the library, and writes `report.json` plus CSV
//! artifacts. Exit codes: 0 pass, 1 gate failure, 2 usage or config
//! error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Invocation};
use config::Config;

#[derive(Parser)]
#[command(name = "cxgeo", version, about = "Complex-metric development pipeline driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML). Optional for geodesic/models.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.json and CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of refinements to run for convergence ratios.
    #[arg(long, default_value_t = 0)]
    refine: u32,
    /// RNG seed for randomized batteries.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Gauss-Codazzi residuals of immersion data
    CheckGc(RunArgs),
    /// Develop immersion data and check the pull-back isometry
    Develop(RunArgs),
    /// Deck-generator monodromy of a cylinder quotient
    Monodromy(RunArgs),
    /// Monodromy-trace sweep over a holomorphic parameter grid
    Sweep(RunArgs),
    /// Integrate K dA over a closed surface
    GaussBonnet(RunArgs),
    /// Closed-form vs ODE geodesic battery
    Geodesic(RunArgs),
    /// Model-isomorphism roundtrip battery
    Models(RunArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::CheckGc(a) => ("check-gc", a),
            Command::Develop(a) => ("develop", a),
            Command::Monodromy(a) => ("monodromy", a),
            Command::Sweep(a) => ("sweep", a),
            Command::GaussBonnet(a) => ("gauss-bonnet", a),
            Command::Geodesic(a) => ("geodesic", a),
            Command::Models(a) => ("models", a),
        }
    }
}

fn load_config(args: &RunArgs) -> Result<Config, CliError> {
    match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Schema(format!("cannot read {}: {e}", path.display()))
            })?;
            Config::from_toml(&text).map_err(CliError::Schema)
        }
        None => Ok(Config::default()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = cli.command.parts();
    let config = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.code());
        }
    };
    let start = std::time::Instant::now();
    let inv = Invocation {
        command: name,
        config,
        out_dir: &args.out,
        refine: args.refine,
        seed: args.seed,
    };
    match commands::run(&inv) {
        Ok(true) => {
            eprintln!("{name}: pass ({:.2}s)", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Ok(false) => {
            eprintln!("{name}: gate failure ({:.2}s)", start.elapsed().as_secs_f64());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
