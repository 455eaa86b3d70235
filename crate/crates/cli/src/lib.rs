//! Batch front end for the maglev toolkit: `run`, `compare`, `drift-sweep`
//! and `analyze` over TOML scenario files.
//!
//! Exit codes: 0 success, 2 configuration error (nothing written),
//! 3 simulation failure (partial artifacts written), 1 I/O failure.
//! Every failure prints one `key=value` line to standard error.

pub mod commands;
pub mod config;
mod plots;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::{analyze, compare, drift_sweep, run};
pub use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "maglev", version, about = "EMS maglev loop simulation and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    pub plots: bool,
    /// Settling band in percent; overrides `metrics.settling_band`.
    #[arg(long, value_name = "PCT")]
    pub band: Option<f64>,
    /// Suppress the summary on standard output.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the `[controller]` scenario.
    Run(CommonArgs),
    /// Simulate every `[[controllers]]` entry and tabulate step metrics.
    Compare(CommonArgs),
    /// Re-run the `[controller]` scenario per `[[drift.periods]]` entry.
    DriftSweep(CommonArgs),
    /// Poles, stability verdict, root locus and force-current curve.
    Analyze(CommonArgs),
}

impl Command {
    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Run(a) | Command::Compare(a) | Command::DriftSweep(a) | Command::Analyze(a) => a,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Config { message: String, location: Option<String> },
    /// One or more simulations stopped early; artifacts were still written.
    #[error("{message}")]
    Simulation {
        message: String,
        fields: Vec<(String, String)>,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Simulation { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }

    /// Single-line `key=value` description for standard error.
    pub fn reason_line(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        match self {
            CliError::Config { location, .. } => {
                parts.push("error=config".into());
                if let Some(loc) = location {
                    parts.push(loc.clone());
                }
            }
            CliError::Simulation { fields, .. } => {
                parts.push("error=simulation".into());
                parts.extend(fields.iter().map(|(k, v)| format!("{k}={v}")));
            }
            CliError::Io { path, .. } => {
                parts.push("error=io".into());
                parts.push(format!("path={:?}", path.display().to_string()));
            }
        }
        let message = match self {
            CliError::Io { source, .. } => source.to_string(),
            other => other.to_string(),
        };
        parts.push(format!("message={:?}", message.replace('\n', " ")));
        parts.join(" ")
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

/// Runs one parsed command line; returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let args = cli.command.args();
    let overrides = Overrides {
        out: args.out.clone(),
        plots: args.plots,
        band_pct: args.band,
    };
    let result = RunConfig::load(&args.config, &overrides).and_then(|cfg| match &cli.command {
        Command::Run(_) => run(&cfg),
        Command::Compare(_) => compare(&cfg),
        Command::DriftSweep(_) => drift_sweep(&cfg),
        Command::Analyze(_) => analyze(&cfg),
    });
    match result {
        Ok(summary) => {
            if !args.quiet {
                print!("{summary}");
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.reason_line());
            e.exit_code()
        }
    }
}
