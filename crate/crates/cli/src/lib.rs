//! Command-line front end: simulate benchmark data, cluster CSV files,
//! score labelings and run replicated benchmark sweeps.

pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod summary;

pub use error::{CliError, CliResult};
