//! Config-file driver for `invdp-core`: loads a JSON run description,
//! dispatches one command, and writes CSV tables plus a JSON report.

pub mod config;
pub mod report;
pub mod run;

pub use config::{load_config, parse_config, Command, ConfigError, RunConfig};
pub use report::RunReport;
pub use run::{run, RunError};
