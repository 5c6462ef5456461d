//! Config loading, experiment dispatch and CSV/manifest output for the
//! `qbattery` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dispatch;
pub mod output;

pub use config::{load_config, load_config_str, load_with_overrides, ConfigError, ExperimentKind, RunConfig};
pub use dispatch::{dispatch, RunError};
pub use output::{write_series, Manifest};
