//! Batch driver: certificates, prepared data, runs, flow-map iteration and
//! the one-dimensional check, each writing hashed artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_check, cmd_onedim, cmd_params, cmd_picard, cmd_prepare, cmd_run};
pub use config::{ParamsMode, SimConfig};
pub use error::CliError;
