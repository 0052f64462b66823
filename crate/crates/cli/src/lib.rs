//! Batch front end for Szilard engine scenarios: scenario files, sweeps,
//! JSON/CSV artifacts and the exclusion scan.

pub mod commands;
pub mod error;
pub mod explicit;
pub mod output;
pub mod scenario;

pub use commands::{run_command, scan_command, scan_summary};
pub use error::{exit, CliError, CliResult};
pub use output::{Format, RunRecord};
pub use scenario::{parse_scenario, parse_scenario_str, Batch, Overrides, SweepPoint};
