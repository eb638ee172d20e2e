//! Command-line front end of the fastgate library: configuration schema,
//! schedule files, output records and the subcommands.

pub mod commands;
pub mod config;
pub mod output;
pub mod schedule;

use fastgate::gatescheme::GateError;
use fastgate::mathieu::MathieuError;
use fastgate::odeoracle::OracleError;
use fastgate::optimizer::OptimizerError;
use fastgate::robustness::RobustnessError;
use fastgate::trapmodel::TrapError;
use std::fmt::Debug;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    /// A library computation failed; `name` is `module::Variant`.
    #[error("{name}: {message}")]
    Numerical { name: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(config::ConfigError::Mathieu { .. }) | CliError::Numerical { .. } => EXIT_NUMERICAL,
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
        }
    }

    /// Line for standard error, carrying the module error name for
    /// numerical failures.
    pub fn diagnostic(&self) -> String {
        match self {
            CliError::Config(config::ConfigError::Mathieu { field, source }) => {
                format!("error: {}: {field}: {source}", name("mathieu", source))
            }
            CliError::Numerical { name, message } => format!("error: {name}: {message}"),
            other => format!("config error: {other}"),
        }
    }
}

/// Variant name from the derived `Debug` output.
fn variant<E: Debug>(e: &E) -> String {
    format!("{e:?}")
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect()
}

fn name<E: Debug>(module: &str, e: &E) -> String {
    format!("{module}::{}", variant(e))
}

fn numerical(name: String, e: &dyn std::fmt::Display) -> CliError {
    CliError::Numerical {
        name,
        message: e.to_string(),
    }
}

impl From<MathieuError> for CliError {
    fn from(e: MathieuError) -> Self {
        numerical(name("mathieu", &e), &e)
    }
}

impl From<TrapError> for CliError {
    fn from(e: TrapError) -> Self {
        match e {
            TrapError::Mathieu(m) => m.into(),
            other => numerical(name("trapmodel", &other), &other),
        }
    }
}

impl From<GateError> for CliError {
    fn from(e: GateError) -> Self {
        numerical(name("gatescheme", &e), &e)
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Trap(t) => t.into(),
            other => numerical(name("odeoracle", &other), &other),
        }
    }
}

impl From<OptimizerError> for CliError {
    fn from(e: OptimizerError) -> Self {
        match e {
            OptimizerError::Trap(t) => t.into(),
            OptimizerError::Mathieu(m) => m.into(),
            OptimizerError::Gate(g) => g.into(),
            other => numerical(name("optimizer", &other), &other),
        }
    }
}

impl From<RobustnessError> for CliError {
    fn from(e: RobustnessError) -> Self {
        match e {
            RobustnessError::Trap(t) => t.into(),
            RobustnessError::Mathieu(m) => m.into(),
            RobustnessError::Oracle(o) => o.into(),
            RobustnessError::Gate(g) => g.into(),
            other => numerical(name("robustness", &other), &other),
        }
    }
}
