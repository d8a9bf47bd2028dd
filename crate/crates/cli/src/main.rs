//! `kresling`: enumerate, simulate, plan and optimize stacked Kresling actuators.

mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "kresling", version, about = "Design and simulate multistable Kresling origami actuators")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Calibration table (TOML). Defaults to the built-in table.
    #[arg(long, global = true, value_name = "PATH")]
    pub calibration: Option<PathBuf>,
    /// Output format. Each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file. Defaults to standard output.
    #[arg(long, short = 'o', global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Seed for randomized methods.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Lift the enumeration and exhaustive-search size guards.
    #[arg(long, global = true)]
    pub force: bool,
    /// Reject pressures outside the calibrated range (default).
    #[arg(long, global = true, conflicts_with = "clamp")]
    pub strict: bool,
    /// Clamp pressures to the calibrated range.
    #[arg(long, global = true)]
    pub clamp: bool,
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the configuration clouds (or a cost table) of every n-unit design.
    Enumerate(commands::EnumerateArgs),
    /// Replay a pressure history and write the tip trajectory.
    Simulate(commands::SimulateArgs),
    /// Find the shortest pressure program reaching a state or configuration.
    Plan(commands::PlanArgs),
    /// Search the design space for the lowest-cost actuator.
    Optimize(commands::OptimizeArgs),
    /// Run a scenario file.
    Run(scenario::RunArgs),
}

/// Command failure, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Invalid arguments or input: exit code 2.
    Usage(String),
    /// Runtime or I/O failure: exit code 1.
    Runtime(String),
}

impl From<kresling_core::Error> for Failure {
    fn from(e: kresling_core::Error) -> Self {
        use kresling_core::Error as E;
        match e {
            E::Guard { .. } => Failure::Usage(format!("{e} (--force)")),
            E::Parse(_) | E::Contract(_) | E::Extrapolation { .. } | E::InvalidSearch(_) => {
                Failure::Usage(e.to_string())
            }
            E::Calibration(_) | E::Unreachable(_) | E::Internal(_) | E::Io(_) | E::Csv(_) | E::Json(_) => {
                Failure::Runtime(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Enumerate(a) => commands::enumerate(&cli.global, &a),
        Command::Simulate(a) => commands::simulate(&cli.global, &a),
        Command::Plan(a) => commands::plan(&cli.global, &a),
        Command::Optimize(a) => commands::optimize(&cli.global, &a),
        Command::Run(a) => scenario::run(&cli.global, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
