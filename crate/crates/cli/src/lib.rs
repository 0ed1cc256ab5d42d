//! Scenario runner for the `shf-core` lab: reads a TOML scenario, runs one
//! pipeline and writes a JSON report with CSV tables and a plot script.

pub mod config;
pub mod error;
pub mod output;
pub mod pipelines;
pub mod refine;
pub mod report;

pub use config::{Pipeline, ScenarioConfig};
pub use error::{CliError, CliResult};
pub use pipelines::{run_file, run_scenario, RunOptions, RunOutcome};
pub use report::{Check, RunReport};
