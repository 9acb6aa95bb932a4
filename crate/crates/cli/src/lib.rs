//! Experiment runner for the sepfluct simulator: TOML configs, check suites
//! and report files.

pub mod config;
pub mod report;
pub mod suites;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig, Overrides, Suite, Violation};
pub use report::{Report, SuiteResult, Table};
pub use suites::{run_suites, write_report, RunError};

/// Process exit status.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const CHECK_FAILED: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    /// Simulation or numerical failure (e.g. an eigensolver error).
    pub const RUNTIME: u8 = 4;
}
