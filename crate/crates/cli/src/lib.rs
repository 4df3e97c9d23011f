//! Driver for the `blowup` solvers: problem files, subcommands, CSV and
//! manifest output, and the acceptance suite behind `blowup verify`.

pub mod cli;
pub mod error;
pub mod grid;
pub mod output;
pub mod problem;
pub mod run;
pub mod verify;

pub use error::{CliError, CliResult};
pub use run::run;
