//! Shared fixtures for the benchmarks.

use secr_core::mcmc::{fit, Chain, McmcConfig};
use secr_core::simulate::{scaled_design, scaled_scenarios, simulate_dataset, SexReveal, TruthRecord};
use secr_core::{CaptureDataset, ModelId, PriorSpec};

/// One high-information desk-scale dataset with its truth.
pub fn dataset() -> (CaptureDataset, TruthRecord) {
    simulate_dataset(&scaled_scenarios()[1], &scaled_design(), 17, SexReveal::AllCaptured)
        .expect("scaled scenario simulates")
}

/// A short chain for estimator benchmarks.
pub fn short_chain(model: ModelId, data: &CaptureDataset, n_iter: usize) -> Chain {
    let prior = PriorSpec::for_statespace(data.statespace());
    let cfg = McmcConfig {
        n_iter,
        burn_in: n_iter / 4,
        seed: 5,
        ..Default::default()
    };
    fit(model, data, &prior, &cfg).expect("chain fits")
}
