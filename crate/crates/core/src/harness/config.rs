//! Experiment configuration: command-line flags layered over an optional
//! JSON config file, resolved against per-command defaults and validated
//! before any computation starts.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::state::DEFAULT_MAX_DIM;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Verify,
    GroverSweep,
    Walk,
    BoundReport,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommandKind::Verify => "verify",
            CommandKind::GroverSweep => "grover-sweep",
            CommandKind::Walk => "walk",
            CommandKind::BoundReport => "bound-report",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Which query algorithm `verify` and `bound-report` analyse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    /// Haar-random unitaries, one algorithm per seed.
    Random,
    /// Grover's algorithm (`m = 1`).
    Grover,
    /// Flagged search (`m = T + 1`).
    Flagged,
}

/// Raw settings, all optional. Used both as the JSON config-file schema and
/// as the target of the command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Query register dimension N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Ancilla dimension M.
    #[arg(long)]
    pub m: Option<usize>,
    /// Fault probability; repeat the flag for a list.
    #[arg(long = "p")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    /// Number of queries T (largest T for sweeps, step cap for walks).
    #[arg(long = "t-max")]
    pub t_max: Option<usize>,
    /// Monte-Carlo trials, or the number of seeds for `verify`.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Success-probability threshold for hitting times.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Largest total dimension evolved exactly.
    #[arg(long = "max-dim")]
    pub max_dim: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long, value_enum)]
    pub alg: Option<AlgorithmKind>,
}

impl Settings {
    /// `self` with every field set in `over` replaced.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            n: over.n.or(self.n),
            m: over.m.or(self.m),
            p: over.p.filter(|p| !p.is_empty()).or(self.p),
            t_max: over.t_max.or(self.t_max),
            trials: over.trials.or(self.trials),
            seed: over.seed.or(self.seed),
            threshold: over.threshold.or(self.threshold),
            max_dim: over.max_dim.or(self.max_dim),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            alg: over.alg.or(self.alg),
        }
    }

    /// Reads a JSON config file. A `command` key, as written in the config
    /// echo of every output, is accepted when it names `command`.
    pub fn from_json_file(path: &Path, command: CommandKind) -> Result<Settings, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config file {}: {e}", path.display())))?;
        let invalid = |e: serde_json::Error| ConfigError(format!("invalid config file {}: {e}", path.display()));
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(invalid)?;
        if let Some(obj) = value.as_object_mut() {
            if let Some(given) = obj.remove("command") {
                if given != serde_json::Value::String(command.to_string()) {
                    return Err(ConfigError(format!("config file is for command {given}, not {command}")));
                }
            }
        }
        serde_json::from_value(value).map_err(invalid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Fully resolved and validated configuration. Serializes to the config echo
/// embedded in every output; the output path is not part of the echo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub n: usize,
    pub m: usize,
    pub p: Vec<f64>,
    pub t_max: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub max_dim: usize,
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alg: Option<AlgorithmKind>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl ExperimentConfig {
    pub fn resolve(command: CommandKind, s: Settings) -> Result<Self, ConfigError> {
        let n = s.n.unwrap_or(match command {
            CommandKind::Verify | CommandKind::GroverSweep => 4,
            CommandKind::Walk => 64,
            CommandKind::BoundReport => 8,
        });
        if n < 2 {
            return fail(format!("--n must be at least 2 (got {n})"));
        }
        let p = s.p.unwrap_or_else(|| match command {
            CommandKind::Verify => vec![0.1, 0.3, 0.5, 0.9],
            _ => vec![0.5],
        });
        if p.is_empty() {
            return fail("--p needs at least one value");
        }
        let open_interval = matches!(command, CommandKind::Verify | CommandKind::BoundReport);
        for &x in &p {
            let ok = if open_interval { x > 0.0 && x < 1.0 } else { (0.0..=1.0).contains(&x) };
            if !ok {
                let range = if open_interval { "(0, 1)" } else { "[0, 1]" };
                return fail(format!("--p {x} must lie in {range} for {command}"));
            }
        }
        let t_max = s.t_max.unwrap_or(match command {
            CommandKind::Verify | CommandKind::GroverSweep | CommandKind::BoundReport => 10,
            CommandKind::Walk => 100 * n,
        });
        if command == CommandKind::Walk && t_max == 0 {
            return fail("--t-max must be at least 1 for walk");
        }
        let trials = s.trials.unwrap_or(match command {
            CommandKind::Verify => 20,
            CommandKind::Walk => 200,
            CommandKind::GroverSweep => 10_000,
            CommandKind::BoundReport => 1,
        });
        if trials == 0 {
            return fail("--trials must be at least 1");
        }
        let max_dim = s.max_dim.unwrap_or(DEFAULT_MAX_DIM);
        if max_dim == 0 {
            return fail("--max-dim must be at least 1");
        }

        let threshold = match command {
            CommandKind::Walk => {
                let th = s.threshold.unwrap_or(0.5);
                if !(th > 1.0 / n as f64 && th < 1.0) {
                    return fail(format!("--threshold {th} must lie in (1/n, 1) = ({}, 1)", 1.0 / n as f64));
                }
                Some(th)
            }
            _ => None,
        };

        let alg = match command {
            CommandKind::Verify => Some(s.alg.unwrap_or(AlgorithmKind::Random)),
            CommandKind::BoundReport => Some(s.alg.unwrap_or(AlgorithmKind::Grover)),
            _ => None,
        };
        let m = match (command, alg) {
            (_, Some(AlgorithmKind::Random)) => s.m.unwrap_or(2),
            (_, Some(AlgorithmKind::Flagged)) => {
                let m = t_max + 1;
                if s.m.is_some_and(|given| given != m) {
                    return fail(format!("flagged search uses m = t_max + 1 = {m}"));
                }
                m
            }
            _ => {
                if s.m.is_some_and(|given| given != 1) {
                    return fail("Grover's algorithm uses m = 1");
                }
                1
            }
        };
        if m == 0 {
            return fail("--m must be at least 1");
        }
        let d = n.checked_mul(m).ok_or_else(|| ConfigError("n * m overflows".into()))?;
        if matches!(command, CommandKind::Verify | CommandKind::BoundReport) && d > max_dim {
            return fail(format!("{command} evolves exactly and needs n * m = {d} <= --max-dim {max_dim}"));
        }

        let format = s.format.unwrap_or(match command {
            CommandKind::BoundReport => OutputFormat::Json,
            _ => OutputFormat::Csv,
        });

        Ok(ExperimentConfig {
            command,
            n,
            m,
            p,
            t_max,
            trials,
            seed: s.seed.unwrap_or(DEFAULT_SEED),
            threshold,
            max_dim,
            format,
            alg,
            out: s.out,
        })
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the config echo.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.echo().to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
