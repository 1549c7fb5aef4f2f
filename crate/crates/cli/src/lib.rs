//! Plumbing for the `teps` command-line tool: plain-text configuration,
//! CSV/JSON dataset ingestion and artifact serialization, and the stage
//! implementations behind each subcommand.
//!
//! Kept as a library so the parsers are reachable from fuzz targets and
//! integration tests.

pub mod config;
pub mod error;
pub mod io;
pub mod stages;

pub use error::{CliError, ErrorKind};

/// CLI result alias.
pub type Result<T> = std::result::Result<T, CliError>;
