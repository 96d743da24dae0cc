//! `f2w`: stable sampling rates and generalized-sampling reconstructions from
//! Fourier samples in wavelet bases.
//!
//! Exit status 0 when every check passes, 1 when a check fails or a computation
//! breaks down, 2 for configuration errors.

mod config;
mod modes;
mod verify;

use clap::{Args, Parser, Subcommand};
use config::{ExperimentConfig, Mode};
use modes::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "f2w", version, about = "Fourier samples to wavelet coefficients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stable sampling rate along a ladder of scales.
    Rate(Common),
    /// Reconstruct a test function or sample file and write images.
    Reconstruct(Common),
    /// Generalized sampling against truncated Fourier series across scales.
    Compare(Common),
    /// Deterministic numerical checks.
    Verify(Common),
    /// Write the cross-Gramian to a text file.
    GramianDump(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides the `seed` key of the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn run(mode: Mode, args: &Common) -> Result<bool, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.check_mode(mode)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Write {
        path: args.out.clone(),
        source,
    })?;
    let ctx = modes::Context::new(cfg, args.out.clone())?;
    match mode {
        Mode::Rate => modes::rate(&ctx),
        Mode::Reconstruct => modes::reconstruct(&ctx),
        Mode::Compare => modes::compare(&ctx),
        Mode::Verify => verify::verify(&ctx),
        Mode::GramianDump => modes::gramian_dump(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::Rate(a) => (Mode::Rate, a),
        Command::Reconstruct(a) => (Mode::Reconstruct, a),
        Command::Compare(a) => (Mode::Compare, a),
        Command::Verify(a) => (Mode::Verify, a),
        Command::GramianDump(a) => (Mode::GramianDump, a),
    };
    match run(mode, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("f2w {}: check failed", mode.name());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("f2w {}: {e}", mode.name());
            ExitCode::from(e.exit_code())
        }
    }
}
