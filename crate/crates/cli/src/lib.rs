//! Command implementations behind the `hydroformer` binary. Each command
//! reads a [`config::RunConfig`], writes plain-text artifacts into the
//! configured output directory and returns its results for programmatic use.

pub mod commands;
pub mod config;
pub mod error;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
