//! Batch front end for the three-level quasi-degenerate reduced dynamics.
//!
//! Subcommands: `resonances`, `evolve`, `reservoir`, `validate`. Scenario
//! parameters come from a JSON config (`--config`); without one the
//! standard operating point is used. `LAMBDA_DYN_THREADS` caps the worker
//! pool for trajectory evaluation. Exit codes: 0 ok, 1 validation failure,
//! 2 config error, 3 numeric error.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::{CliError, OutputFormat};
use config::ScenarioConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lambda-dyn",
    version,
    about = "Two-timescale reduced dynamics of a three-level system with \
             quasi-degenerate levels in a thermal bosonic reservoir"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario configuration (JSON, schema 1); defaults to the standard
    /// operating point.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON artifacts and the run report.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Primary output format.
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the nine-resonance table and the numeric-vs-perturbative
    /// comparison.
    Resonances(CommonArgs),
    /// Evolve an initial state over a time grid and emit the trajectory.
    Evolve {
        #[command(flatten)]
        common: CommonArgs,
        /// Emit only the contribution of resonance (sector, index),
        /// e.g. --term 0,2.
        #[arg(long)]
        term: Option<String>,
    },
    /// Emit spectral density and correlation tables plus the constants
    /// record.
    Reservoir(CommonArgs),
    /// Run the built-in validation suite; exit 0 iff all criteria pass.
    Validate(CommonArgs),
}

fn load_config(path: &Option<PathBuf>) -> Result<ScenarioConfig, CliError> {
    match path {
        Some(p) => ScenarioConfig::load(p).map_err(CliError::Config),
        None => Ok(ScenarioConfig::standard()),
    }
}

fn prepare_out_dir(dir: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

fn parse_term(term: &Option<String>) -> Result<Option<(i8, usize)>, CliError> {
    let Some(raw) = term else {
        return Ok(None);
    };
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Config(format!(
            "--term expects \"sector,index\", got {raw:?}"
        )));
    }
    let sector: i8 = parts[0]
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("--term sector {:?} is not an integer", parts[0])))?;
    let index: usize = parts[1]
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("--term index {:?} is not an integer", parts[1])))?;
    Ok(Some((sector, index)))
}

fn init_thread_pool() {
    if let Ok(raw) = std::env::var("LAMBDA_DYN_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // ignore failure: the global pool may already exist in tests
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: LAMBDA_DYN_THREADS={raw:?} is not a positive integer; ignored"),
        }
    }
}

fn run() -> Result<(), CliError> {
    init_thread_pool();
    let cli = Cli::parse();
    match &cli.command {
        Command::Resonances(common) => {
            let cfg = load_config(&common.config)?;
            prepare_out_dir(&common.out)?;
            commands::cmd_resonances(&cfg, &common.out, common.format)
        }
        Command::Evolve { common, term } => {
            let cfg = load_config(&common.config)?;
            prepare_out_dir(&common.out)?;
            let term = parse_term(term)?;
            commands::cmd_evolve(&cfg, &common.out, common.format, term)
        }
        Command::Reservoir(common) => {
            let cfg = load_config(&common.config)?;
            prepare_out_dir(&common.out)?;
            commands::cmd_reservoir(&cfg, &common.out, common.format)
        }
        Command::Validate(common) => {
            let cfg = load_config(&common.config)?;
            prepare_out_dir(&common.out)?;
            commands::cmd_validate(&cfg, &common.out)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
