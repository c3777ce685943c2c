//! Configuration, task dispatch and artifact output for the command line tool.

pub mod config;
pub mod output;
pub mod tasks;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig};
pub use output::{read_ndjson, read_series, write_series, RunRecord};
pub use tasks::{run, CliError, Outcome, Task};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "MFGCN_OUT";
