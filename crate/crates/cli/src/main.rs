//! `isc-detect`: simulate, calibrate, detect and evaluate transient internal
//! short circuits from the command line.

// NaN must fail the `!(x > bound)` parameter checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{context}{source}")]
    Core {
        context: String,
        source: isc_detect::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn at(path: &Path, source: isc_detect::Error) -> Self {
        CliError::Core {
            context: format!("{}: ", path.display()),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Core { source, .. } if source.is_io() => 2,
            CliError::Core { .. } => 1,
        }
    }
}

impl From<isc_detect::Error> for CliError {
    fn from(source: isc_detect::Error) -> Self {
        CliError::Core {
            context: String::new(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "isc-detect",
    version,
    about = "Pseudo-OCV difference detector for transient internal shorts"
)]
pub struct Cli {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `simulation.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct ScheduleArgs {
    /// Use the built-in eleven-event replay schedule.
    #[arg(long)]
    table1: bool,
    /// JSON schedule file.
    #[arg(long)]
    schedule: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a trace (healthy unless a schedule is given).
    Simulate {
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// `t_s,i_a` CSV current profile instead of the synthetic cycle.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Output trace; defaults to paths.healthy_trace or paths.fault_trace.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive thresholds from a healthy trace.
    Calibrate {
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stream a trace through the detector.
    Detect {
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Score detected events against a schedule (replay schedule by default).
    Evaluate {
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long)]
        events: Option<PathBuf>,
        /// Onset matching tolerance, seconds.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the full replay for many seeds and report aggregate scores.
    Sweep {
        #[arg(long, default_value_t = 16)]
        seeds: u64,
        /// Run on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Write the bundled synthetic OCV and R0 tables as CSV.
    Tables {
        #[arg(long, default_value = "data")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
