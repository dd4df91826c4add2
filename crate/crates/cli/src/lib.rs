//! Configuration-driven runner for the `stfv` solver: runs described by a
//! JSON file, randomized certification sweeps, and the preset catalogue.

pub mod config;
pub mod error;
pub mod run;
pub mod verify;

pub use config::RunConfig;
pub use error::CliError;
