//! Experiment pipeline around the `embedleak` library: configuration, staged
//! execution, persisted results, reports and plots.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod results;
pub mod store;

pub use config::{AttackKind, ExperimentConfig};
pub use error::{HarnessError, HarnessResult, Stage};
pub use pipeline::Pipeline;
pub use report::{write_report, Report};
pub use store::RunStore;

use std::path::PathBuf;

/// Environment variable naming the dataset root when no flag or config entry does.
pub const DATA_ENV: &str = "EMBEDLEAK_DATA";

/// Dataset root: explicit flag, then config entry, then `$EMBEDLEAK_DATA`, then `./data`.
pub fn resolve_data_root(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.data_root.clone())
        .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}
