//! Config-driven experiments on top of `pucci-core`: parsing, running,
//! artifact writing and the bundled suites.

pub mod config;
pub mod run;
pub mod suites;

pub use config::{Experiment, ExperimentConfig, ParseError};
pub use run::{run, Outcome, RunError, RunOptions};
