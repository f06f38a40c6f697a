//! Library side of the `cascade` command: the run configuration and one
//! function per subcommand.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{RunConfig, CONFIG_VERSION};
pub use error::{CliError, Result};
