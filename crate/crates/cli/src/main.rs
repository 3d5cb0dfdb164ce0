//! `detox`: partition a corpus by toxicity, train n-gram models, generate
//! with a decay ensemble, and evaluate the continuations.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;

use crate::config::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "detox", version, about = "Decoding-time detoxification toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Seed for all randomness (subsampling and sampling).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// off, error, warn, info, debug or trace.
    #[arg(long, global = true)]
    log_level: Option<LevelFilter>,
    /// JSON run config; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a corpus and carve percentile-bounded partitions.
    Partition(commands::PartitionArgs),
    /// Train an n-gram model on a corpus.
    Train(commands::TrainArgs),
    /// Generate continuations for a prompt set.
    Generate(commands::GenerateArgs),
    /// Score generations and write attribute reports.
    Evaluate(commands::EvaluateArgs),
}

/// Settings shared by every subcommand after merging config and flags.
#[derive(Debug)]
pub struct Settings {
    pub seed: Option<u64>,
    pub file: FileConfig,
}

/// Exit 2 for usage/config problems, 1 for everything else.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(anyhow::anyhow!("{msg}"))
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<detox_core::Error> for Failure {
    fn from(e: detox_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

fn run(cli: Cli) -> CmdResult {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    let level = match (cli.global.log_level, &file.log_level) {
        (Some(l), _) => l,
        (None, Some(s)) => s
            .parse()
            .map_err(|_| Failure::usage(format!("invalid log_level {s:?} in config")))?,
        (None, None) => LevelFilter::Info,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_target(false)
        .try_init();

    let workers = cli.global.workers.or(file.workers).unwrap_or(0);
    let pool = detox_core::worker_pool(workers).map_err(Failure::usage)?;
    let settings = Settings {
        seed: cli.global.seed.or(file.seed),
        file,
    };
    pool.install(|| match cli.command {
        Command::Partition(a) => commands::partition(a, &settings),
        Command::Train(a) => commands::train(a, &settings),
        Command::Generate(a) => commands::generate(a, &settings),
        Command::Evaluate(a) => commands::evaluate(a, &settings),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
