//! Synthetic populations: matching, children, schooling completion,
//! leaving home, and survey-style observation.

mod generations;
mod lifecycle;
mod matching;
mod observe;
mod population;

pub use crate::data_io::discretize_education;
pub use generations::{simulate_generations, SimulatedGeneration};
pub use lifecycle::{
    CompletionDelay, CompletionProfile, LeaveHomeModel, MIN_COMPLETION_AGE, MIN_LEAVE_AGE, NEVER_LEAVES,
};
pub use matching::{calibrate_copula, match_latents};
pub use observe::{observe, observe_microdata, ObservationRule};
pub use population::{
    child_latent, generate_population, link_spouses, match_couples, produce_children, BlockFrame, BlockModel,
    Individual, ModelSource, Population, PopulationConfig,
};
