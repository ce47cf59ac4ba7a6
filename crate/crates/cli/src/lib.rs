//! Configured runs of the isentropic Navier-Stokes solver with Lyapunov
//! diagnostics, plus self-check subcommands.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod presets;

use std::fmt;

/// Failure classes of the command-line tool, each with its own exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable or invalid configuration (exit 2).
    Config(String),
    /// Solver, functional or output failure (exit 3).
    Numerical(String),
    /// A self-check did not pass (exit 4).
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Check(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Reads and parses a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<config::ParsedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config::parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
