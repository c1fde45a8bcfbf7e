//! Command-line front end for the multi-view transductive classification
//! toolkit: synthetic dataset generation, dataset file ingestion, experiment
//! execution with concurrent (method, seed) jobs, metric evaluation, and
//! standalone matrix completion.

pub mod config;
pub mod dataset_io;
pub mod error;
pub mod report;
pub mod runner;
pub mod synth;

pub use config::{load_config, parse_config, DataSource, ExperimentConfig};
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER};
pub use runner::{run_experiment, write_outputs, RunOutputs, SplitIndices};
pub use synth::{generate_synthetic, SyntheticData, SyntheticSpec};
