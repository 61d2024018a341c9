//! Library half of the `optlab` binary: experiment configuration, the run
//! orchestrator, the verification suites, and trace analysis. The binary is a
//! thin clap wrapper over these modules so the integration and acceptance
//! tests can drive them directly.

// negated float comparisons like !(x > 0.0) reject NaN; x <= 0.0 would not
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod protocol;
pub mod runner;
pub mod trace;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Configuration, schema or environment problems (exit code 2).
    #[error("{0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Run(#[from] optlab_core::run::RunError),
}

impl HarnessError {
    pub fn io(path: impl Into<String>) -> impl FnOnce(std::io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}
