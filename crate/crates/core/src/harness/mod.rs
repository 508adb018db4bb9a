//! Command-line experiment harness: `verify`, `grover-sweep`, `walk` and
//! `bound-report`.
//!
//! Exit codes: `0` when every check passes, `1` when a numerical check fails,
//! `2` for usage or configuration errors.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

pub use commands::{run_command, Outcome};
pub use config::{AlgorithmKind, CommandKind, ConfigError, ExperimentConfig, OutputFormat, Settings};
pub use output::{strip_timestamp, Cell, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "faultq", version, about = "Faulty-oracle search simulator and progress-measure checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every per-step and aggregate inequality over a grid of instances.
    Verify(CommandArgs),
    /// Success probability of Grover's algorithm against the number of queries.
    GroverSweep(CommandArgs),
    /// Hitting times of the noisy Grover walk.
    Walk(CommandArgs),
    /// Final progress per marked item and the aggregate query bound.
    BoundReport(CommandArgs),
}

#[derive(Debug, Args)]
pub struct CommandArgs {
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

impl Command {
    fn split(self) -> (CommandKind, CommandArgs) {
        match self {
            Command::Verify(a) => (CommandKind::Verify, a),
            Command::GroverSweep(a) => (CommandKind::GroverSweep, a),
            Command::Walk(a) => (CommandKind::Walk, a),
            Command::BoundReport(a) => (CommandKind::BoundReport, a),
        }
    }
}

/// Resolves the configuration for a parsed command line.
pub fn resolve(command: Command) -> Result<ExperimentConfig, ConfigError> {
    let (kind, args) = command.split();
    let base = match &args.config {
        Some(path) => Settings::from_json_file(path, kind)?,
        None => Settings::default(),
    };
    ExperimentConfig::resolve(kind, base.overlay(args.settings))
}

/// Parses `args` (program name first), runs the command, writes the output
/// and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let config = match resolve(cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let outcome = match run_command(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let payload = outcome.report.render(&config, now);
    let written = match &config.out {
        Some(path) => std::fs::write(path, payload.as_bytes()),
        None => std::io::stdout().lock().write_all(payload.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return EXIT_USAGE;
    }
    for line in &outcome.failures {
        eprintln!("check failed: {line}");
    }
    if outcome.passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}
