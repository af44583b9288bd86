//! Verification suites, reports and tensor dumps behind the `qkck` binary.

pub mod config;
pub mod dump;
pub mod error;
pub mod report;
pub mod suites;
pub mod tolerances;

pub use config::{Suite, SuiteConfig};
pub use error::{CliError, CliResult};
pub use report::{Check, Comparison, Report};
pub use suites::run_suite;
