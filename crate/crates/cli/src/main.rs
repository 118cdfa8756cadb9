//! `priorcipher`: run detection, protocol, and security experiments from
//! TOML configs and write versioned JSON summaries and TSV tables.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "priorcipher", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bayes-optimal measurement for one prior.
    Solve(Common),
    /// Minimax measurement and least-favorable prior.
    Minimax(Common),
    /// Simulate a keyed session and write its transcript.
    Simulate(Common),
    /// Search priors (and family parameters) for the largest advantage ratio.
    EtaSweep(Common),
    /// Brute-force posterior over short secret keys from Eve's outcomes.
    Attack(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "PRIORCIPHER_OUT", default_value = ".")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    NotConverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::NotConverged(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl From<priorcipher::Error> for Failure {
    fn from(e: priorcipher::Error) -> Self {
        match e {
            priorcipher::Error::NotConverged { .. } => Self::NotConverged(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

type Handler = fn(&str, Option<u64>) -> commands::Outcome;

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, f): (&Common, Handler) = match &cli.command {
        Command::Solve(c) => (c, commands::solve),
        Command::Minimax(c) => (c, commands::minimax),
        Command::Simulate(c) => (c, commands::simulate),
        Command::EtaSweep(c) => (c, commands::eta_sweep),
        Command::Attack(c) => (c, commands::attack),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::Io(format!("reading {}: {e}", common.config.display())))?;
    let (files, status) = f(&text, common.seed)?;
    output::write_all(&common.out, &files)?;
    status
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(msg) | Failure::NotConverged(msg) | Failure::Io(msg)) = &f;
            eprintln!("priorcipher: {msg}");
            ExitCode::from(f.code())
        }
    }
}
