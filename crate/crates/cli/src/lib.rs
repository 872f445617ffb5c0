//! Configuration, orchestration and output for the `bgk` command.

pub mod app;
pub mod config;
pub mod output;
pub mod snapshot;

pub use app::{check_config, load_config, prepare, run, solve_target, CliError, RunSummary};
pub use config::{ConfigError, RunConfig};
pub use snapshot::{Snapshot, SnapshotError};
