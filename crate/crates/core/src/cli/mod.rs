//! Command-line experiment driver: config parsing, runners and output formats.

pub mod config;
pub mod experiments;
pub mod ppm;
pub mod seam;

pub use config::{EstimatorKind, Experiment, ExperimentConfig, KEYS};
pub use experiments::{run, RunOutcome};
