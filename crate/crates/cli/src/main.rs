//! Command-line frontend for the binary-decision-model solver. Every
//! subcommand reads one JSON config, writes its artifacts into an output
//! directory, and exits 0 on success, 1 on a usage or config error, and 2
//! when a numerical precondition fails (well-formed input, but the
//! requested analysis does not exist in that regime). Given the same
//! config and seed, every run is byte-identical.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

/// Shared flags: one config in, one directory out.
#[derive(Args)]
pub struct RunArgs {
    /// Path to the JSON config for this command
    #[arg(long)]
    pub config: PathBuf,
    /// Directory the artifacts are written into (created if absent)
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the config, where the command uses one
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write SVG plots of the results
    #[arg(long)]
    pub plot: bool,
}

#[derive(Parser)]
#[command(
    name = "bdm",
    version,
    about = "Solver and calibration toolkit for a mean-field model of binary collective decisions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a distribution and write it at the requested times
    Solve(RunArgs),
    /// Write the exact steady-state distribution
    Steady(RunArgs),
    /// Run a stochastic ensemble and write trajectories and statistics
    Simulate(RunArgs),
    /// First-passage analysis of a bistable chain
    Metastability(RunArgs),
    /// Fit (F, J, gamma) to a dataset by maximum likelihood
    Calibrate(RunArgs),
    /// Mean-field equilibria and steady-state landmarks
    Equilibria(RunArgs),
    /// Eigenvalues of the master operator
    Spectrum(RunArgs),
}

/// Failures split by exit code: bad input versus a regime in which the
/// requested analysis is undefined.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical precondition failed: {msg}"),
        }
    }
}

impl From<bdm_core::Error> for CliError {
    fn from(e: bdm_core::Error) -> Self {
        if e.is_precondition() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    // clap's default exit code for usage errors is 2, which this tool
    // reserves for numerical failures; remap usage problems to 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Solve(args) => commands::solve(&args),
        Command::Steady(args) => commands::steady(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Metastability(args) => commands::metastability(&args),
        Command::Calibrate(args) => commands::calibrate(&args),
        Command::Equilibria(args) => commands::equilibria(&args),
        Command::Spectrum(args) => commands::spectrum(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bdm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
