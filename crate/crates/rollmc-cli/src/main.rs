//! `rollmc` — rolling-window particle MCMC for state space models.
//!
//! Subcommands: `simulate` (synthetic data), `run` (rolling / sequential /
//! simple estimation), `oracle-lg` (exact conjugate answers for the linear
//! Gaussian model), `diagnose` (summarize a diagnostics CSV).
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or usage error,
//! 3 numerical failure (all particle weights zero).

mod commands;
mod config;
mod csvio;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;
use config::{parse_mode, RunConfig};

#[derive(Parser)]
#[command(name = "rollmc", version, about = "Rolling-window particle MCMC for state space models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the run mode: rolling | sequential | simple.
    #[arg(long)]
    mode: Option<String>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the data CSV path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Worker threads (0 = automatic).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a simulated data CSV for the configured model.
    Simulate(CommonArgs),
    /// Run the estimation and write results/diagnostics/log-ML CSVs.
    Run(CommonArgs),
    /// Write exact per-window posteriors and marginal likelihoods (model = lg).
    OracleLg(CommonArgs),
    /// Print summary statistics of a diagnostics CSV.
    Diagnose {
        /// A diagnostics.csv produced by `run`.
        file: PathBuf,
    },
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_file(&args.config).map_err(|e| CliError::Usage(e.0))?;
    if let Some(seed) = args.seed {
        cfg.engine.seed = seed;
    }
    if let Some(mode) = &args.mode {
        cfg.mode = parse_mode(mode).map_err(|e| CliError::Usage(e.0))?;
        cfg.engine.mode = cfg.mode;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(data) = &args.data {
        cfg.data = Some(data.clone());
    }
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    }
    if cfg.threads > 0 {
        // Ignore the error if a pool already exists (repeat invocations in
        // one process only happen in tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Simulate(args) => commands::cmd_simulate(&load_config(&args)?),
        Cmd::Run(args) => commands::cmd_run(&load_config(&args)?),
        Cmd::OracleLg(args) => commands::cmd_oracle_lg(&load_config(&args)?),
        Cmd::Diagnose { file } => commands::cmd_diagnose(&file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rollmc: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
