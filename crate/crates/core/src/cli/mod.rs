//! Command-line front end: configuration, tables and the `blockade`
//! subcommands.

mod commands;
mod config;
mod table;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub use commands::{
    cmd_optimize, cmd_power, cmd_simulate, cmd_sweep, cmd_wigner, schedule_table, to_frame,
    trajectory_table, CheckpointFile, Context, Outcome, StoredState,
};
pub use config::{
    BlockadeSection, CavitySection, Format, HoldMode, MaterialSection, Metric, OutputSection,
    ProtocolSection, Resolved, RunConfig, Spacing, SweepAxisName, SweepSpec, WignerSection,
};
pub use table::{write_float, Cell, Column, ResultTable};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameChoice {
    Lab,
    Displaced,
}

#[derive(Debug, Parser)]
#[command(name = "blockade", version, about = "Kerr-cavity photon blockade simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Displaced-frame Fock truncation (overrides `protocol.frame_dim`).
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Frame in which a checkpoint is expressed for `wigner`.
    #[arg(long, global = true, value_enum)]
    pub frame: Option<FrameChoice>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kerr strength, drive settings and pump powers.
    Power,
    /// Run the protocol and write the trajectory.
    Simulate,
    /// Optimize the initialization ramp.
    Optimize,
    /// Sweep one parameter and tabulate metrics.
    Sweep,
    /// Wigner function of a stored checkpoint.
    Wigner {
        /// Checkpoint name (overrides `wigner.checkpoint`).
        #[arg(long)]
        checkpoint: Option<String>,
    },
}

fn context(cli: &Cli, checkpoint: Option<String>) -> Result<Context> {
    let (config, bytes) = match &cli.config {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| {
                crate::Error::config(p.display().to_string(), format!("cannot read: {e}"))
            })?;
            let text = String::from_utf8_lossy(&bytes);
            (RunConfig::from_toml(&text)?, bytes)
        }
        None => (RunConfig::default(), Vec::new()),
    };
    let out_dir = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| config.output.directory.clone());
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(crate::Error::config("--jobs", "must be >= 1"));
        }
    }
    Ok(Context {
        config,
        config_bytes: bytes,
        out_dir,
        dim: cli.dim,
        frame: cli.frame,
        jobs: cli.jobs,
        checkpoint,
    })
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let checkpoint = match &cli.command {
        Command::Wigner { checkpoint } => checkpoint.clone(),
        _ => None,
    };
    let outcome = context(&cli, checkpoint).and_then(|ctx| match cli.command {
        Command::Power => cmd_power(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
        Command::Optimize => cmd_optimize(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Wigner { .. } => cmd_wigner(&ctx),
    });
    match outcome {
        Ok(o) => o.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
