//! Experiment runner for the `wcreg` toolkit.
//!
//! Every command reads an [`ExperimentConfig`] (file, then `--set`
//! overrides, then the dedicated flags) and writes plain CSV into the output
//! directory together with the effective `config.txt`.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::Parser;
use thiserror::Error;

pub use commands::{read_table, run};
pub use config::{Command, ExperimentConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Module(#[from] wcreg::Error),

    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for configuration and input problems, 3 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Module(_) | CliError::Output { .. } => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wcreg", version, about = "Worst-case regularization experiments")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,

    /// Config file with `key = value` lines.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Number of grid nodes.
    #[arg(long, value_name = "N")]
    pub grid: Option<usize>,

    /// Overrides any config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Args {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        for pair in &self.set {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {pair:?}")))?;
            config.set(key.trim(), value.trim())?;
        }
        config.command = Some(self.command);
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out.clone_from(out);
        }
        if let Some(grid) = self.grid {
            config.grid = grid;
        }
        Ok(config)
    }
}
