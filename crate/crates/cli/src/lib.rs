//! Driver behind the `killing-cmc-lab` binary.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 numerical failure. Errors are reported as JSON on stderr.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{CliError, Outcome};
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "killing-cmc-lab", version, about = "Construct and verify rotational CMC Killing graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in models and their parameters.
    Models(ModelsArgs),
    /// Build a profile; writes profile.csv and summary.json.
    Construct(RunArgs),
    /// Build and run the verification suite; writes report.json.
    Verify(RunArgs),
    /// Tabulate heights and bounds over a range of c or H0; writes sweep.csv.
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
pub struct ModelsArgs {
    /// Accepted for a uniform command line; not read.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Output directory (default: `output_dir` of the config, else `.`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a parsed command line. `threads` is the raw `KCL_THREADS` value.
pub fn run(cli: Cli, threads: Option<&str>) -> Outcome {
    let result = match cli.command {
        Command::Models(args) => Ok(commands::cmd_models(args.json)),
        Command::Construct(args) => load(&args).and_then(|cfg| {
            commands::cmd_construct(&cfg, args.json, &cfg.output_dir(args.out.as_deref()))
        }),
        Command::Verify(args) => load(&args).and_then(|cfg| {
            commands::cmd_verify(&cfg, args.json, &cfg.output_dir(args.out.as_deref()))
        }),
        Command::Sweep(args) => load(&args).and_then(|cfg| {
            let cap = commands::thread_cap(threads)?;
            commands::cmd_sweep(&cfg, args.json, &cfg.output_dir(args.out.as_deref()), cap)
        }),
    };
    result.unwrap_or_else(CliError::into_outcome)
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    Ok(RunConfig::from_path(&args.config)?)
}
