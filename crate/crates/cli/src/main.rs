//! Command-line entry point. Exit codes: 0 success, 1 validation or runtime
//! error, 2 partial collection, 64 usage error.

mod config;
mod manifest;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use promptcomp_core::corpus::Split;
use promptcomp_core::shapley::SelectionMode;

use pipeline::RunOutcome;

const EXIT_VALIDATION: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "promptcomp",
    version,
    about = "Enumerate prompting-technique compositions, collect predictions, \
             attribute performance with Shapley analysis, and train an adaptive \
             per-instance composition selector"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List every composition in the configured space.
    Enumerate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Collect predictions for all compositions over the corpus.
    Collect {
        #[arg(long)]
        config: PathBuf,
        /// Split to collect: train, validation, test, or all.
        #[arg(long, default_value = "all")]
        split: String,
        /// Write matrices even when some predictions failed.
        #[arg(long)]
        allow_partial: bool,
    },
    /// Build the cooperative game over techniques from collected predictions.
    Game {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Variant fixing, repeatable: technique=variant.
        #[arg(long = "fix")]
        fixes: Vec<String>,
    },
    /// Exact Shapley values and interaction indices for a built game.
    Shapley {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "fix")]
        fixes: Vec<String>,
    },
    /// Pick the best coalition from a Shapley report's reconstruction.
    Select {
        #[arg(long)]
        config: PathBuf,
        /// Reconstruction mode: sv or si.
        #[arg(long, default_value = "si")]
        mode: String,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "fix")]
        fixes: Vec<String>,
    },
    /// Train the per-instance composition selector, one model per seed.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Select a composition per instance with the trained models.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Compare adaptive selection against fixed compositions and baselines.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Regenerate the markdown report, folding in any Shapley results.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic planted corpus plus a ready-to-run mock config.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        train: usize,
        #[arg(long, default_value_t = 200)]
        validation: usize,
        #[arg(long, default_value_t = 200)]
        test: usize,
        #[arg(long, default_value_t = 17)]
        seed: u64,
    },
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "validation" => Ok(Split::Validation),
        "test" => Ok(Split::Test),
        other => Err(format!("unknown split '{other}'")),
    }
}

fn parse_splits(s: &str) -> Result<Vec<Split>, String> {
    if s == "all" {
        Ok(vec![Split::Train, Split::Validation, Split::Test])
    } else {
        Ok(vec![parse_split(s)?])
    }
}

fn load_config(path: &PathBuf) -> Result<config::Config, ExitCode> {
    config::validate_config(path).map_err(|errors| {
        eprintln!("invalid config {}:", path.display());
        for e in &errors {
            eprintln!("  {e}");
        }
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn run(command: Command) -> Result<RunOutcome, ExitCode> {
    let usage = |message: String| {
        eprintln!("{message}");
        ExitCode::from(EXIT_USAGE)
    };
    let runtime = |e: promptcomp_core::CoreError| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_VALIDATION)
    };
    match command {
        Command::Enumerate { config } => {
            pipeline::cmd_enumerate(&load_config(&config)?).map_err(runtime)
        }
        Command::Collect {
            config,
            split,
            allow_partial,
        } => {
            let splits = parse_splits(&split).map_err(usage)?;
            pipeline::cmd_collect(&load_config(&config)?, &splits, allow_partial).map_err(runtime)
        }
        Command::Game {
            config,
            split,
            seed,
            fixes,
        } => {
            let split = parse_split(&split).map_err(usage)?;
            pipeline::cmd_game(&load_config(&config)?, split, seed, &fixes).map_err(runtime)
        }
        Command::Shapley {
            config,
            split,
            seed,
            fixes,
        } => {
            let split = parse_split(&split).map_err(usage)?;
            pipeline::cmd_shapley(&load_config(&config)?, split, seed, &fixes).map_err(runtime)
        }
        Command::Select {
            config,
            mode,
            split,
            seed,
            fixes,
        } => {
            let mode: SelectionMode = mode.parse().map_err(|e| usage(format!("{e}")))?;
            let split = parse_split(&split).map_err(usage)?;
            pipeline::cmd_select(&load_config(&config)?, mode, split, seed, &fixes).map_err(runtime)
        }
        Command::Train { config } => pipeline::cmd_train(&load_config(&config)?).map_err(runtime),
        Command::Predict { config, split } => {
            let split = parse_split(&split).map_err(usage)?;
            pipeline::cmd_predict(&load_config(&config)?, split).map_err(runtime)
        }
        Command::Evaluate { config, split } => {
            let split = parse_split(&split).map_err(usage)?;
            pipeline::cmd_evaluate(&load_config(&config)?, split).map_err(runtime)
        }
        Command::Report { config } => pipeline::cmd_report(&load_config(&config)?).map_err(runtime),
        Command::Synth {
            out_dir,
            train,
            validation,
            test,
            seed,
        } => pipeline::cmd_synth(&out_dir, train, validation, test, seed).map_err(runtime),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(RunOutcome::Complete) => ExitCode::SUCCESS,
        Ok(RunOutcome::PartialCollection) => ExitCode::from(EXIT_PARTIAL),
        Err(code) => code,
    }
}
