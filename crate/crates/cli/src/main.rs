//! `edagcn` — reproducible command-line experiments: graph dithering,
//! recovery-probability probes, training, perturbation harnesses,
//! gradient checking, and parameter sweeps.

mod commands;
mod config;
mod pipeline;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Errors surfaced to the shell. Validation problems exit with 2,
/// numeric failures (including a failed gradient check) with 3.
#[derive(Debug)]
pub enum CliError {
    Core(edagcn_core::Error),
    Usage(String),
    CheckFailed(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(edagcn_core::Error::Numeric(_)) => 3,
            CliError::CheckFailed(_) => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::CheckFailed(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<edagcn_core::Error> for CliError {
    fn from(e: edagcn_core::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(
    name = "edagcn",
    version,
    about = "Edge-dithered auxiliary graphs and the adaptive GCN over them"
)]
struct Cli {
    /// Worker thread bound; overrides the EDAGCN_THREADS variable.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw auxiliary graphs and write them as edge lists plus a manifest.
    Dither(commands::dither::Args),
    /// Print closed-form and Monte-Carlo recovery probabilities.
    Probe(commands::probe::Args),
    /// Train a model; writes history, checkpoint, and test metrics.
    Train(commands::train::Args),
    /// Perturb a graph (random insertions or a targeted attack).
    Attack(commands::attack::Args),
    /// Verify analytic gradients against finite differences.
    Gradcheck(commands::gradcheck::Args),
    /// Train across a sequence of values of one knob; emit a CSV.
    Sweep(commands::sweep::Args),
    /// Evaluate a checkpoint on one data split.
    Evaluate(commands::evaluate::Args),
}

fn thread_bound(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("EDAGCN_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = thread_bound(cli.threads) {
        // Results do not depend on the pool size; this only bounds CPU use.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    let result = match cli.command {
        Command::Dither(args) => commands::dither::run(args),
        Command::Probe(args) => commands::probe::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Attack(args) => commands::attack::run(args),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
