//! Particle-based simulation of an enzyme-assisted diffusive link.
//!
//! Every molecule is tracked individually. Each step displaces all particles,
//! keeps enzymes inside their cube, fires first-order reactions of bound
//! complexes and then binds free pairs closer than the binding radius.

pub mod grid;
pub mod state;
pub mod trial;

pub use state::{Census, Particle, ParticleKind, ReactionTally, SimState, UnimolecularProbs};
pub use trial::{decide, run_trial, trial_seed, ObservationSeries, SampleSchedule, TRIAL_CSV_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] molcom_core::Error),
    #[error("sample schedule: {0}")]
    Schedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;
