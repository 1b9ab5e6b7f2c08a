//! Config-driven experiment runner behind the `ppde` binary.

pub mod config;
pub mod runner;

pub use config::{ExperimentConfig, ParamValue};
pub use runner::{output_dir, render_table, run, write_outputs, Artifact, Command, RunOutcome};
