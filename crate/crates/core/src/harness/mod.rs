//! Run configuration, the auto-sized grid, CSV/JSON output, the weak-form and
//! β-characteristic diagnostics, convergence studies and the command line.

pub mod cli;
pub mod config;
pub mod convergence;
pub mod diagnostics;
pub mod grid;
pub mod output;
pub mod run;

use std::path::PathBuf;

use crate::error::SolverError;

pub use config::{GridSpec, OutputSpec, RunConfig, SnapshotGrid};
pub use convergence::{convergence_study, ConvergenceLevel, ConvergenceTable};
pub use diagnostics::{
    beta_characteristic_residual, default_test_bank, weak_form_residual, BetaTracker, TestBump,
    WeakFormAccumulator, WeakFormResidual,
};
pub use grid::{auto_grid, check_coverage};
pub use run::{compare_with_peakons, run_simulation, Comparison, RunOptions, RunResult};

/// Errors surfaced by the harness. [`HarnessError::exit_code`] maps them onto
/// the CLI convention: 1 for configuration problems, 2 for numerical failure.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output error: {0}")]
    Output(String),

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } | HarnessError::Output(_) => 1,
            HarnessError::Solver(e) => match e {
                SolverError::InvalidParameter { .. }
                | SolverError::InvalidGrid(_)
                | SolverError::GridTooSmall(_)
                | SolverError::NonFiniteInput(_)
                | SolverError::InsufficientSnapshots(_) => 1,
                _ => 2,
            },
            HarnessError::Numerical(_) => 2,
        }
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;
