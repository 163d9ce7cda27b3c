//! Experiment harness: configuration, trial orchestration, reports and figures.

pub mod cli;
pub mod config;
pub mod figures;
pub mod report;
pub mod run;
pub mod svg;

pub use config::{Analysis, Check, ConfigError, ExperimentConfig, OperatorSpec};
pub use report::{ReportError, RunReport, TrialOutcome, TrialRecord, SCHEMA_VERSION};
pub use run::{aggregate, run, RunError};
