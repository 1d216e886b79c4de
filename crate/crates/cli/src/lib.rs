//! Batch front-end: configs, vector files, commands and CSV reports.

pub mod config;
pub mod run;
pub mod vector;

pub use config::{parse_config, Config, ConfigError, SpaceExpr};
pub use run::{fmt_num, run, run_and_write, Cli, CliError, Report};
pub use vector::{format_vector, parse_vector, VectorError};
