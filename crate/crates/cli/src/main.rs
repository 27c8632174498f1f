use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;

/// Hypergraph signal processing experiments.
#[derive(Debug, Parser)]
#[command(name = "henn", version)]
struct Cli {
    /// Output directory for every artifact of the run.
    #[arg(long, global = true, env = "HENN_OUT_DIR", default_value = "henn-out")]
    out: PathBuf,

    /// Global seed; overrides the seeds in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Report formats to write (the manifest is always written).
    #[arg(long, global = true, value_enum, value_delimiter = ',', default_value = "json,csv")]
    format: Vec<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, clap::Args)]
struct ConfigArgs {
    /// JSON config file; unknown keys are rejected.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set train.lr=0.001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a torus hypergraph and a source-localization dataset.
    GenData(ConfigArgs),
    /// Train and compare the four architectures.
    Train(ConfigArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(ConfigArgs),
    /// Spectral similarity of two shift operators.
    Similarity(ConfigArgs),
    /// Certify the filter, GNN and HENN transferability bounds.
    Bounds(ConfigArgs),
    /// Similarity decay study on random graphs.
    RandStudy(ConfigArgs),
}

/// A failure with its process exit code: 2 for configuration errors, 3 for
/// numerical failures, 4 for violated assumptions.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn assumption(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<henn::Error> for CliError {
    fn from(e: henn::Error) -> Self {
        use henn::Error::*;
        let code = match &e {
            NonFinite { .. } | NonFiniteGradient { .. } => 3,
            NotPsd { .. }
            | PerturbedNotPsd { .. }
            | KernelCondition { .. }
            | Disconnected { .. }
            | NotSymmetric { .. }
            | PerturbationTooLarge { .. }
            | TooFewHyperedges { .. }
            | RetriesExhausted { .. } => 4,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::config(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let ctx = commands::RunContext {
        out: cli.out,
        seed: cli.seed,
        formats: cli.format,
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(&ctx, config::load(a.config.as_deref(), &a.overrides)),
        Command::Train(a) => commands::train(&ctx, config::load(a.config.as_deref(), &a.overrides)),
        Command::Eval(a) => commands::eval(&ctx, config::load(a.config.as_deref(), &a.overrides)),
        Command::Similarity(a) => {
            commands::similarity(&ctx, config::load(a.config.as_deref(), &a.overrides))
        }
        Command::Bounds(a) => commands::bounds(&ctx, config::load(a.config.as_deref(), &a.overrides)),
        Command::RandStudy(a) => {
            commands::rand_study(&ctx, config::load(a.config.as_deref(), &a.overrides))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
