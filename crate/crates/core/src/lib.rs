//! Physical model, closed-form channel response and receiver error analysis
//! for a diffusive molecular link whose propagation medium contains freely
//! diffusing enzymes that degrade the information molecules.

pub mod channel;
pub mod detect;
pub mod error;
pub mod physchem;
pub mod seeding;
pub mod special;

pub use channel::{decay_time, expected_observed, impulse_concentration, peak_time, ChannelModel, DecayMethod, DecayQuery};
pub use detect::{
    bit_error_prob, count_pmf, count_tail, isi_mean, mean_error_prob, observation_probability, BitSequence,
    CountFamily, CountModel, ErrorReport, IsiMode, SamplingTime,
};
pub use error::{Error, Result};
pub use physchem::{binding_radius, diffusion_coefficient, rms_separation, EnvironmentConstants, SpeciesKind, SystemConfig};
