//! `teleport`: runs the teleportation simulator and the classical-bound
//! optimizer from JSON configs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 invariant violation.

mod commands;
mod config;
mod error;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Format, Output};
use error::CliError;

#[derive(Parser)]
#[command(name = "teleport", version, about = "Two-photon teleportation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep Bob's analyzer for all four outcomes and fit the fringes.
    Teleport(Common),
    /// Optimize classical strategies and certify the classical bound.
    Bound(Common),
    /// Simulate the 12-cell trine experiment and estimate S.
    VerifyS(Common),
    /// Print the joint state written over Alice's four outcomes.
    Decompose(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the summary and data files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format written to stdout.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (output, out_dir) = match cli.command {
        Command::Teleport(c) => {
            let cfg: config::TeleportConfig = config::load(c.config.as_deref())?;
            let seed = c.seed.or(cfg.seed).unwrap_or(0);
            (commands::teleport(&cfg, seed, c.format)?, c.out.or(cfg.out_dir))
        }
        Command::Bound(c) => {
            let cfg: config::BoundConfig = config::load(c.config.as_deref())?;
            let seed = c.seed.or(cfg.seed).unwrap_or(0);
            (commands::bound(&cfg, seed, c.format)?, c.out.or(cfg.out_dir))
        }
        Command::VerifyS(c) => {
            let cfg: config::VerifySConfig = config::load(c.config.as_deref())?;
            let seed = c.seed.or(cfg.seed).unwrap_or(0);
            (commands::verify_s(&cfg, seed, c.format)?, c.out.or(cfg.out_dir))
        }
        Command::Decompose(c) => {
            let cfg: config::DecomposeConfig = config::load(c.config.as_deref())?;
            (commands::decompose_cmd(&cfg, c.format)?, c.out.or(cfg.out_dir))
        }
    };
    emit(&output, out_dir)
}

fn emit(output: &Output, out_dir: Option<PathBuf>) -> Result<(), CliError> {
    if let Some(dir) = out_dir {
        fs::create_dir_all(&dir)?;
        for (name, bytes) in &output.files {
            fs::write(dir.join(name), bytes)?;
        }
    }
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(&output.stdout)?;
    stdout.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
