//! Experiment runner for the Burgers PINN solver: reproduction runs, error
//! bound and stability studies, forcing verification and checkpoint evaluation.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod studies;
pub mod verify;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
