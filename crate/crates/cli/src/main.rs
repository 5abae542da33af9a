//! `ctxrec`: inspect contextual rating files, train and evaluate contextual
//! recommenders, and explain what they learned.
//!
//! Exit codes: 0 on success, 1 for configuration or input-parsing errors,
//! 2 when a run fails after its inputs were accepted.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "ctxrec", version, about = "Context-aware recommendation with interpretable contextual effects")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for fold assignment, model initialization and data generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Folds evaluated in parallel.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summarize a rating file.
    Inspect {
        /// Rating CSV (defaults to the config's dataset).
        data: Option<PathBuf>,
    },
    /// Train models on the full dataset and save them.
    Train(ModelArgs),
    /// Cross-validated top-N evaluation.
    Eval(ModelArgs),
    /// Similar-context and deviation reports.
    Explain {
        #[command(flatten)]
        models: ModelArgs,
        /// Target situation as `dim=cond;dim=cond` (unlisted dimensions are na).
        #[arg(long = "target", value_name = "SITUATION")]
        targets: Vec<String>,
        /// Rows per similar-context report.
        #[arg(short, long)]
        k: Option<usize>,
        /// Explain a saved model instead of training.
        #[arg(long = "load", value_name = "MODEL_FILE")]
        load: Vec<PathBuf>,
    },
    /// Write a synthetic dataset (and its planted truth, where there is one).
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
    },
}

#[derive(Debug, clap::Args)]
struct ModelArgs {
    /// Rating CSV (overrides the config's dataset).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Model to use; repeat for several (overrides the config's list).
    #[arg(long = "model", value_name = "NAME")]
    models: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Planted global deviations.
    Deviation,
    /// Planted ICS similarity tables.
    Similarity,
    /// Dense tensor from a planted rank-2 CP model.
    Cp,
    /// Same shape as the STS tourism data.
    Sts,
    /// Same shape as the in-car music data.
    Incar,
}

/// A failed run and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ctxrec::Error> for Failure {
    fn from(e: ctxrec::Error) -> Self {
        Failure::runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::runtime(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.override_seed(s);
    }
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    let apply = |cfg: &mut RunConfig, args: ModelArgs| {
        if args.data.is_some() {
            cfg.dataset = args.data;
        }
        if !args.models.is_empty() {
            cfg.models = args.models;
        }
    };
    match cli.command {
        Command::Inspect { data } => {
            if data.is_some() {
                cfg.dataset = data;
            }
            commands::inspect(&cfg)
        }
        Command::Train(args) => {
            apply(&mut cfg, args);
            commands::train(&cfg)
        }
        Command::Eval(args) => {
            apply(&mut cfg, args);
            commands::eval(&cfg)
        }
        Command::Explain { models, targets, k, load } => {
            apply(&mut cfg, models);
            if !targets.is_empty() {
                cfg.explain.targets = targets;
            }
            if k.is_some() {
                cfg.explain.k = k;
            }
            if !load.is_empty() {
                cfg.explain.model_files = load;
            }
            commands::explain(&cfg)
        }
        Command::Synth { kind } => commands::synth(&cfg, kind),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
