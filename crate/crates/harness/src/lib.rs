//! Experiment runner for the molcom analytic model and particle simulator.

pub mod error;
pub mod experiment;
pub mod table;

pub use error::{Error, Result};
pub use experiment::{config_hash, peak_table, preset_table, run_experiment, ExperimentSpec, Mode, DEFAULT_BUDGET};
pub use table::{summarize, Metadata, ResultTable};
