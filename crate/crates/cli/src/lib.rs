//! Experiment runner: declarative TOML configs in, deterministic CSV and
//! JSON artifacts out.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod oracle;
pub mod registry;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Kind};
pub use error::{CliError, ErrorRecord, Result};
pub use run::{compute, run, Artifacts, OUTPUT_ENV};

/// `git describe`-style version of this build.
pub const VERSION: &str = env!("FKCOUPLE_VERSION");
