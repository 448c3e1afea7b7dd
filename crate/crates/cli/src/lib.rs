//! Command-line front end: scenario files, run kinds and output writing.

pub mod error;
pub mod provenance;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use run::{run, RunOutput};
pub use scenario::{RunKind, Scenario};
