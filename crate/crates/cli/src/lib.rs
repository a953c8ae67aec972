//! Command-line driver for the abuse-core pipeline: JSON run configs, a
//! fixed stage order and reproducible on-disk artifacts.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_str, ConfigError, RunConfig, StageToggles};
pub use run::{execute, Command, RunError, RunSummary};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "ABUSE_PIPELINE_THREADS";
