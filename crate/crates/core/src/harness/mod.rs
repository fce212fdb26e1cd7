//! Experiment driver: configuration, parallel realizations, CSV outputs.
//!
//! Each command writes its CSV files and a `manifest.toml` into the output
//! directory and returns an [`Outcome`] whose [`ExitStatus`] becomes the
//! process exit code.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

mod commands;
pub mod config;
pub mod csv;
mod fixed_point;
pub mod realization;

pub use commands::{
    cmd_a_distribution, cmd_fixed_point, cmd_limit_check, cmd_moments_check, cmd_simulate,
    run_command,
};
pub use config::{ExperimentConfig, Mode, Overrides, Preset};
pub use fixed_point::{run_fixed_point_suite, FixedPointReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("arithmetic overflow with bigint disabled: {0}")]
    Overflow(#[from] crate::urn::UrnError),
    #[error(transparent)]
    FixedPoint(#[from] crate::fixedpoint::FixedPointError),
}

impl HarnessError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            HarnessError::Overflow(_) => ExitStatus::Overflow,
            _ => ExitStatus::IoOrConfig,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Pass = 0,
    CheckFailed = 1,
    IoOrConfig = 2,
    Overflow = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Result of one command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: ExitStatus,
    /// Human-readable summary, one line per check.
    pub lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            status: ExitStatus::Pass,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.lines.push(format!(
            "{} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        ));
        if !pass {
            self.raise(ExitStatus::CheckFailed);
        }
    }

    fn note(&mut self, line: String) {
        self.lines.push(line);
    }

    fn raise(&mut self, s: ExitStatus) {
        self.status = self.status.max(s);
    }
}
