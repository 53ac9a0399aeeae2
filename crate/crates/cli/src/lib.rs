//! Command-line front end for the `elastinet` solvers: single solves, the
//! table experiments, noise-rate fits and β selection.

pub mod commands;
pub mod experiments;
pub mod io;

pub use commands::{run, Cli, CliError};
