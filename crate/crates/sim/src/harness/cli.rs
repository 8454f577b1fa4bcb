use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::commands::{cmd_attack, cmd_join, cmd_run, AttackScenario, EXIT_ABORT, EXIT_CONFIG};
use super::config::{ConfigError, ExperimentConfig};
use crate::error::SimError;

#[derive(Debug, Parser)]
#[command(name = "secagg", version, about = "Secure aggregation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run honest sessions and export per-entity metrics.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run a scripted malicious-server scenario and check its expected outcome.
    Attack {
        #[arg(value_enum)]
        scenario: Scenario,
        /// Number of decryptors shown the altered view (inconsistent-sets).
        #[arg(long)]
        split: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Add clients and a decryptor level mid-session.
    Join {
        #[arg(long, default_value_t = 0)]
        new_clients: usize,
        #[arg(long, default_value_t = 0)]
        new_decryptors: usize,
        /// Threshold of the new decryptor level; defaults to the current holder count + 1.
        #[arg(long)]
        level_threshold: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    InconsistentSets,
    InconsistentModel,
}

/// Flags shared by every command; each overrides the same key in `--config`.
#[derive(Clone, Debug, Default, Args)]
pub struct Common {
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub clients: Option<String>,
    #[arg(long)]
    pub participants: Option<String>,
    #[arg(long)]
    pub probability: Option<String>,
    #[arg(long)]
    pub decryptors: Option<String>,
    #[arg(long)]
    pub threshold: Option<String>,
    #[arg(long)]
    pub dropout: Option<String>,
    #[arg(long = "eta-c")]
    pub eta_c: Option<String>,
    #[arg(long = "eta-d")]
    pub eta_d: Option<String>,
    #[arg(long)]
    pub len: Option<String>,
    #[arg(long)]
    pub iters: Option<String>,
    #[arg(long)]
    pub degree: Option<String>,
    /// oneround or tss.
    #[arg(long)]
    pub mode: Option<String>,
    /// static or dynamic.
    #[arg(long)]
    pub selection: Option<String>,
    /// quorum or threshold.
    #[arg(long = "abort-rule")]
    pub abort_rule: Option<String>,
    /// bls or tiny.
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long = "delay-ms")]
    pub delay_ms: Option<String>,
    #[arg(long = "jitter-ms")]
    pub jitter_ms: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    /// Draw inputs from all of Z_{2^32} instead of [0, 2^16).
    #[arg(long = "full-range")]
    pub full_range: bool,
    /// Record handler CPU time (host dependent, breaks byte-identical CSVs).
    #[arg(long)]
    pub cpu: bool,
}

impl Common {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        let flags = [
            ("clients", &self.clients),
            ("participants", &self.participants),
            ("probability", &self.probability),
            ("decryptors", &self.decryptors),
            ("threshold", &self.threshold),
            ("dropout", &self.dropout),
            ("eta_c", &self.eta_c),
            ("eta_d", &self.eta_d),
            ("len", &self.len),
            ("iters", &self.iters),
            ("degree", &self.degree),
            ("mode", &self.mode),
            ("selection", &self.selection),
            ("abort_rule", &self.abort_rule),
            ("group", &self.group),
            ("seed", &self.seed),
            ("out", &self.out),
            ("delay_ms", &self.delay_ms),
            ("jitter_ms", &self.jitter_ms),
            ("trials", &self.trials),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.full_range |= self.full_range;
        cfg.cpu |= self.cpu;
        cfg.finish()
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let common = match &cli.command {
        Command::Run { common } | Command::Attack { common, .. } | Command::Join { common, .. } => common,
    };
    let cfg = match common.resolve() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = match &cli.command {
        Command::Run { .. } => cmd_run(&cfg, out),
        Command::Attack { scenario, split, .. } => {
            let scenario = match scenario {
                Scenario::InconsistentSets => AttackScenario::InconsistentSets { split: *split },
                Scenario::InconsistentModel => AttackScenario::InconsistentModel,
            };
            cmd_attack(&cfg, scenario, out)
        }
        Command::Join { new_clients, new_decryptors, level_threshold, .. } => {
            cmd_join(&cfg, *new_clients, *new_decryptors, *level_threshold, out)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(SimError::Config(e)) | Err(SimError::InvalidPlan(e)) => {
            let _ = writeln!(err, "config error: {e}");
            EXIT_CONFIG
        }
        Err(SimError::Protocol(e)) => {
            let _ = writeln!(err, "protocol error: {e}");
            EXIT_ABORT
        }
    }
}

pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = write!(err, "{e}");
            code
        }
    }
}
