//! `dgmm`: generate synthetic data, train, reconstruct images from voxels,
//! and score the reconstructions.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Caps the worker pool when set.
const THREADS_ENV: &str = "DGMM_NUM_THREADS";

#[derive(Parser, Debug)]
#[command(name = "dgmm", version, about = "Two-view image/voxel model: train and reconstruct")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic two-view dataset.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `generate.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model to the training split of `data.path`.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `train.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct the test-split images from their voxels.
    Reconstruct {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `predict.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        model: PathBuf,
        /// Overrides `data.path`.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score reconstructions against the dataset images.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reconstructions: PathBuf,
        /// Overrides `data.path`.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) if !p.exists() => Err(CliError::Config(format!("config {} does not exist", p.display()))),
        Some(p) => RunConfig::read(p),
        None => Ok(RunConfig::default()),
    }
}

fn cap_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    log::debug!("built without the parallel feature; ignoring {THREADS_ENV}={n}");
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    cap_threads()?;
    match cli.command {
        Command::Generate { config, seed, out } => commands::generate(load_config(config.as_deref())?, seed, &out),
        Command::Train { config, seed, out } => commands::train_cmd(load_config(Some(&config))?, seed, &out),
        Command::Reconstruct {
            config,
            seed,
            model,
            dataset,
            out,
        } => commands::reconstruct(load_config(config.as_deref())?, seed, &model, dataset.as_deref(), &out),
        Command::Evaluate {
            config,
            reconstructions,
            dataset,
            out,
        } => {
            let summary = commands::evaluate(load_config(config.as_deref())?, &reconstructions, dataset.as_deref(), &out)?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().to_string();
            let err = CliError::Config(first);
            eprintln!("{}", err.render());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
