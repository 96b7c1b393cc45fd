//! `blocksparse` command-line front end.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{keys_help, Config};
use error::CliError;

#[derive(Parser)]
#[command(name = "blocksparse", version, about = "Group-sparse recovery, coherence diagnostics and demixing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file (nested objects or dotted keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set scene.alpha=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set io.output_dir=DIR`.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic demixing instance (instance.six).
    Gen(Common),
    /// Coherence report of a dictionary (coherence.json).
    Coherence {
        #[command(flatten)]
        common: Common,
        /// BDX dictionary; defaults to the demixing dictionary of the scene.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Group Lasso on an instance (solve.json, estimate.bin).
    Solve {
        #[command(flatten)]
        common: Common,
        /// SIX instance; defaults to a freshly generated scene.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// DCT/Dirac demixing (demix.json, estimate.bin).
    Demix {
        #[command(flatten)]
        common: Common,
        /// WFD wavefield; defaults to a freshly generated scene.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Primal-dual witness certificate and recovery conditions (certify.json).
    Certify {
        #[command(flatten)]
        common: Common,
        /// SIX instance; defaults to a freshly generated scene.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Phase-transition sweep (phase.csv, phase.pgm, manifest.json).
    Phase(Common),
    /// Re-render phase.csv and phase.pgm from a stored manifest.
    Render {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<io.output_dir>/manifest.json`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

pub const SUBCOMMANDS: &[&str] = &["gen", "coherence", "solve", "demix", "certify", "phase", "render"];

fn command() -> clap::Command {
    SUBCOMMANDS
        .iter()
        .fold(Cli::command(), |cmd, name| cmd.mut_subcommand(*name, |sub| sub.after_help(keys_help(name))))
}

fn run() -> Result<(), CliError> {
    let matches = command().get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let (name, common) = match &cli.command {
        Command::Gen(c) => ("gen", c),
        Command::Coherence { common, .. } => ("coherence", common),
        Command::Solve { common, .. } => ("solve", common),
        Command::Demix { common, .. } => ("demix", common),
        Command::Certify { common, .. } => ("certify", common),
        Command::Phase(c) => ("phase", c),
        Command::Render { common, .. } => ("render", common),
    };
    let mut overrides = common.overrides.clone();
    if let Some(dir) = &common.output_dir {
        overrides.push(format!("io.output_dir={}", serde_json::Value::String(dir.display().to_string())));
    }
    let cfg = Config::load(name, common.config.as_deref(), &overrides)?;
    match &cli.command {
        Command::Gen(_) => commands::gen(&cfg),
        Command::Coherence { input, .. } => commands::coherence(&cfg, input.as_deref()),
        Command::Solve { input, .. } => commands::solve(&cfg, input.as_deref()),
        Command::Demix { input, .. } => commands::demix(&cfg, input.as_deref()),
        Command::Certify { input, .. } => commands::certify(&cfg, input.as_deref()),
        Command::Phase(_) => commands::phase(&cfg),
        Command::Render { manifest, .. } => commands::render(&cfg, manifest.as_deref()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
