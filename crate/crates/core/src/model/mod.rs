//! Data model, likelihood and priors.

pub mod data;
pub mod detection;
pub mod likelihood;
pub mod prior;
pub mod types;

pub use data::{coincident_cells, reorder_by_permutation, CaptureDataset, DatasetParts, Detector, RowCaptures};
pub use detection::{detection_prob, trap_entry_prob};
pub use likelihood::{
    log_likelihood, observed_sex, per_individual_log_likelihood, per_individual_log_likelihoods,
    PairStats, SexEvidence,
};
pub use prior::{log_latent_prior, log_prior};
pub use types::{
    LatentState, ModelId, ModelParams, Param, Permutation, Point, PriorSpec, StateSpace, TrapGrid,
};
