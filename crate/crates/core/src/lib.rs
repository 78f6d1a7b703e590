//! Spatial capture-recapture with two partially linked detectors: models,
//! simulation, MCMC fitting, marginal likelihoods and selection criteria.

pub mod criteria;
pub mod error;
pub mod io;
pub mod marglik;
pub mod mcmc;
pub mod model;
pub mod numeric;
pub mod simulate;
pub mod study;

pub use error::{Error, Result};
pub use model::*;
