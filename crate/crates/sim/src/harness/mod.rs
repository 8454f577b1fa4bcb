//! Experiment configuration and the `run`, `attack` and `join` commands.

pub mod cli;
pub mod commands;
pub mod config;

pub use commands::{
    cmd_attack, cmd_join, cmd_run, summary_table, AttackScenario, EXIT_ABORT, EXIT_ATTACK, EXIT_CONFIG, EXIT_OK,
};
pub use config::{ConfigError, ExperimentConfig, GroupBackend, SelectionKind};
