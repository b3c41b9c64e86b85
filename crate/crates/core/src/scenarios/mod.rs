//! Configured scenarios: beam runs, studies and their output formats.

pub mod config;
pub mod init;
pub mod output;
pub mod run;
pub mod study;

pub use config::ScenarioConfig;
pub use run::{run, RunOutput, Simulation};
