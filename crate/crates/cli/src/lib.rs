//! Batch front end for `relaxbias-core`: JSON configs in, JSON and text
//! reports out.

pub mod config;
pub mod error;
pub mod exec;
pub mod expr;
pub mod json;
pub mod render;
pub mod run;

pub use config::{parse_config, prepare, Analysis, RunConfig};
pub use error::CliError;
pub use run::{config_digest, run, write_outputs, Outcome, Overrides, Report};

pub const CONFIG_SCHEMA: &str = include_str!("../schema/config.schema.json");
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");
