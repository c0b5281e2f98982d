//! Command-line plumbing for `vortexrate-core`: spectrum files, presets,
//! run configurations, thread-parallel drivers and verification reports.

pub mod config;
pub mod format;
pub mod parallel;
pub mod report;
pub mod run;
pub mod verify;

pub use config::{Command, RunConfig, SpectrumSource};
pub use run::{run, RunError, RunOutcome, Sweep, EXIT_CHECK_FAILED, EXIT_NUMERICAL, EXIT_USAGE};
pub use vortexrate_core as core;
