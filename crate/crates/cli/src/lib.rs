//! Command-line pipeline for scanclass and the local review service.

pub mod commands;
pub mod config;
pub mod error;
pub mod server;

pub use config::PipelineConfig;
pub use error::{exit, CliError};
