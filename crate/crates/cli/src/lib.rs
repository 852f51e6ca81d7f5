//! Configuration-driven runs of the levylab pipeline.
//!
//! Each stage (density, potential, spectrum, chi2, sample) is a library
//! call; [`pipeline::run_pipeline`] chains them and writes CSV and JSON
//! artifacts plus a `run.json` manifest.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod validate;

pub use config::PipelineConfig;
pub use error::CliError;
pub use pipeline::{run_pipeline, Pipeline, Stage};
pub use validate::{validate, ValidateOptions, ValidationReport};
