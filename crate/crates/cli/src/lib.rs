//! Configuration, orchestration and file output for the `threewave` binary.
//!
//! Each subcommand is a plain function here so tests can drive it without a
//! process boundary.

use std::fmt;

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub use commands::{run_equilibrium, run_simulate, run_stability, run_sweep, Manifest};
pub use config::{RunConfig, SweepAxis};
pub use verify::{run_verify, VerifyReport};

/// Why a subcommand did not succeed, with the process exit code for each.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or invalid configuration.
    Config(anyhow::Error),
    /// The solver gave up or produced an invalid state.
    Integration(anyhow::Error),
    Io(anyhow::Error),
    Checks {
        failed: usize,
        total: usize,
    },
    Sweep {
        failed: usize,
        total: usize,
    },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Integration(_) | Failure::Sweep { .. } => 3,
            Failure::Io(_) | Failure::Checks { .. } => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "invalid configuration: {e:#}"),
            Failure::Integration(e) => write!(f, "integration failed: {e:#}"),
            Failure::Io(e) => write!(f, "{e:#}"),
            Failure::Checks { failed, total } => write!(f, "{failed} of {total} checks failed"),
            Failure::Sweep { failed, total } => write!(f, "{failed} of {total} sweep runs failed"),
        }
    }
}

impl std::error::Error for Failure {}
