//! Config-driven experiment runner for the stratified ABC samplers.

pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod plot;
pub mod runner;

pub use config::{parse_config, parse_config_str, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use runner::{diagnose_chain_file, emit_plot_data, output_path, run_batch, run_experiment, RunArtifacts, StageArtifacts};
