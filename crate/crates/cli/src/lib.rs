//! The `cfx` command line: generate graphs, train embeddings, explain
//! targets and evaluate the explanations, recording a manifest per run.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod pipeline;

use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;

pub use commands::{execute, Command};
pub use config::Config;
pub use manifest::Manifest;

#[derive(Parser, Debug)]
#[command(
    name = "cfx",
    version,
    about = "Counterfactual explanations for node embeddings"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Config override as section.key=value; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

pub fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref(), &cli.sets, cli.seed, cli.workers)?;
    execute(&cli.command, &config)?;
    Ok(())
}
