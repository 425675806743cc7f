//! Configuration, file formats and subcommand drivers behind the
//! `kfold-stability` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, Result};
