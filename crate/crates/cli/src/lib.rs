//! Command-line experiments on top of `bjj_core`.
//!
//! Every command reads a [`RunConfig`] (the built-in defaults when no
//! `--config` is given), writes its data files atomically and returns a
//! [`Report`] whose gates decide the exit status.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

pub use commands::{Gate, Report};
pub use config::{CommandName, Format, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "bjj",
    version,
    about = "Bose Josephson junction quench and phase-noise experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; defaults for the command when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (directory for cat-relaxation).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for trajectory sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; rayon's default when omitted.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Visibility decay: noiseless, noisy closed form and full matrix pipeline.
    Visibility,
    /// Diagonal/off-diagonal relaxation of filtered cat states.
    CatRelaxation,
    /// Quantum Fisher information against filter amplitude.
    FisherScan,
    /// Monte-Carlo trajectories against the analytic density matrix.
    McValidate,
    /// Print the default configuration of a command as TOML.
    Defaults {
        #[arg(value_enum)]
        name: CommandName,
    },
}

impl Command {
    fn name(&self) -> Option<CommandName> {
        match self {
            Command::Visibility => Some(CommandName::Visibility),
            Command::CatRelaxation => Some(CommandName::CatRelaxation),
            Command::FisherScan => Some(CommandName::FisherScan),
            Command::McValidate => Some(CommandName::McValidate),
            Command::Defaults { .. } => None,
        }
    }
}

/// Configuration for `name` after applying the file and the flag overrides.
pub fn resolve_config(cli: &Cli, name: CommandName) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::defaults(name),
    };
    if config.command != name {
        bail!(
            "configuration is for `{}`, not `{}`",
            config.command.as_str(),
            name.as_str()
        );
    }
    if let Some(out) = &cli.out {
        config.output.path = out.clone();
    }
    if let Some(format) = cli.format {
        config.output.format = format;
    }
    if let Some(seed) = cli.seed {
        config.mc.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

pub fn run_config(config: &RunConfig) -> Result<Report> {
    match config.command {
        CommandName::Visibility => commands::visibility_cmd(config),
        CommandName::CatRelaxation => commands::cat_relaxation_cmd(config),
        CommandName::FisherScan => commands::fisher_scan_cmd(config),
        CommandName::McValidate => commands::mc_validate_cmd(config),
    }
}

/// Execute the parsed command line. `Defaults` prints to stdout (or `--out`)
/// and reports no gates.
pub fn run(cli: &Cli) -> Result<Report> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| anyhow::anyhow!("cannot configure thread pool: {e}"))?;
    }
    match (&cli.command, cli.command.name()) {
        (Command::Defaults { name }, _) => {
            let text = RunConfig::defaults(*name).to_toml()?;
            match &cli.out {
                Some(path) => {
                    output::write_atomic(path, text.as_bytes())?;
                    Ok(Report {
                        outputs: vec![path.clone()],
                        gates: Vec::new(),
                    })
                }
                None => {
                    print!("{text}");
                    Ok(Report::default())
                }
            }
        }
        (_, Some(name)) => run_config(&resolve_config(cli, name)?),
        (_, None) => unreachable!("every data command has a name"),
    }
}
