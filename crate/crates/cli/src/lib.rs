//! Command-line front end: evaluation commands, verification suites with
//! JSON reports, and CSV plot data.

pub mod commands;
pub mod emit;
pub mod error;
pub mod input;
pub mod report;
pub mod suites;

pub use error::{CliError, CliResult};
pub use report::{Case, SuiteReport};
pub use suites::{run_suite, RunConfig, ToleranceOverride};
