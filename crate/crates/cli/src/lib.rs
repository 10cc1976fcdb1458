//! Config-driven experiments over the `sdmlink` simulator.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod pipeline;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, Result};
pub use experiments::run;
pub use output::{Assertion, ExperimentOutput};
