//! `pimbs`: generate data, train networks and run loss ablations from a JSON config.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Overrides;
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "pimbs", version, about = "Physics-informed body schema learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the train/eval split of every (n_train, seed) pair as CSV.
    Generate(RunArgs),
    /// Train each configured loss on every (n_train, seed) pair.
    Train(RunArgs),
    /// Multi-seed ablation over the configured losses; writes summary.csv.
    Ablation(RunArgs),
    /// Basic, Basic+Const and Basic+Const+PINN at each configured alpha.
    AlphaSweep(RunArgs),
    /// Print tables for every summary.csv in an output directory.
    Report {
        /// Output directory of earlier runs.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Comma-separated seeds; overrides `train.seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Use 1000 hidden units and 20000 epochs unless the config says otherwise.
    #[arg(long)]
    full_scale: bool,
    /// Exit 0 even when some seeds fail; their errors go to the manifest.
    #[arg(long)]
    allow_failures: bool,
}

impl RunArgs {
    fn load(&self) -> Result<config::Experiment, CliError> {
        let ov = Overrides { output: self.output.clone(), seeds: self.seeds.clone(), full_scale: self.full_scale };
        config::load(&self.config, &ov)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => commands::generate(&a.load()?),
        Command::Train(a) => commands::train(&a.load()?, a.allow_failures),
        Command::Ablation(a) => commands::ablation(&a.load()?, a.allow_failures),
        Command::AlphaSweep(a) => commands::sweep(&a.load()?, a.allow_failures),
        Command::Report { dir } => commands::report(&dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
