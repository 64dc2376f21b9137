//! Experiment runner for the natmaplab checks: configs in, `result.json` and CSV plot data out.

pub mod checks;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod run;
pub mod result;

pub use config::{Experiment, ExperimentConfig, ResolvedConfig, OUTPUT_DIR_ENV};
pub use error::CliError;
pub use result::{ExperimentResult, Row, Verdict};
pub use run::{run, run_config, RunOutcome};
