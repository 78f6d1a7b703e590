//! Metropolis-within-Gibbs sampler for the four models.

mod init;
pub mod io;
mod sampler;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CaptureDataset, LatentState, ModelId, ModelParams, Param, Point, PriorSpec};

pub use io::{read_chain, write_chain};
pub use sampler::fit;

/// Random-walk proposal scales. Probabilities move on the logit scale and
/// movement scales on logit(sigma / R).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalScales {
    pub phi: f64,
    pub omega0: f64,
    pub p0: f64,
    pub sigma: f64,
    /// Standard deviation of the activity-centre walk, in state-space units.
    pub s_walk: f64,
}

impl Default for ProposalScales {
    fn default() -> Self {
        ProposalScales {
            phi: 0.25,
            omega0: 0.2,
            p0: 0.2,
            sigma: 0.15,
            s_walk: 0.2,
        }
    }
}

impl ProposalScales {
    pub fn for_param(&self, p: Param) -> f64 {
        match p {
            Param::Phi => self.phi,
            Param::Omega0 => self.omega0,
            Param::P0 => self.p0,
            _ => self.sigma,
        }
    }
}

/// Switches that turn the sampler into a test harness.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationMode {
    /// Replace the likelihood by a constant, so the chain targets the prior.
    pub flat_likelihood: bool,
    /// Hold z at these values.
    pub fixed_z: Option<Vec<bool>>,
    /// Restrict activity centres to these points (uniform prior over them).
    pub s_grid: Option<Vec<Point>>,
}

impl ValidationMode {
    pub fn is_active(&self) -> bool {
        self.flat_likelihood || self.fixed_z.is_some() || self.s_grid.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th iteration after burn-in.
    pub thin: usize,
    pub scales: ProposalScales,
    /// Identity swaps proposed per iteration; `None` means 2M.
    pub l_block: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "skip_validation")]
    pub validation: ValidationMode,
}

fn skip_validation(v: &ValidationMode) -> bool {
    !v.is_active()
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_iter: 5000,
            burn_in: 1500,
            thin: 1,
            scales: ProposalScales::default(),
            l_block: None,
            seed: 1,
            validation: ValidationMode::default(),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::arg(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::arg("thinning factor must be at least 1"));
        }
        let s = &self.scales;
        for (name, v) in [
            ("phi", s.phi),
            ("omega0", s.omega0),
            ("p0", s.p0),
            ("sigma", s.sigma),
            ("s_walk", s.s_walk),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::arg(format!("proposal scale `{name}` must be positive")));
            }
        }
        if let Some(g) = &self.validation.s_grid {
            if g.is_empty() {
                return Err(Error::arg("validation grid is empty"));
            }
        }
        Ok(())
    }

    /// Number of stored draws.
    pub fn n_draws(&self) -> usize {
        (self.n_iter - self.burn_in).div_ceil(self.thin)
    }
}

/// One stored posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub params: ModelParams,
    pub latent: LatentState,
}

/// Accepted / proposed counts per move type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub counts: BTreeMap<String, (u64, u64)>,
}

impl Acceptance {
    pub(crate) fn record(&mut self, name: &str, accepted: bool) {
        let e = self.counts.entry(name.to_string()).or_default();
        e.0 += accepted as u64;
        e.1 += 1;
    }

    pub fn rate(&self, name: &str) -> Option<f64> {
        self.counts
            .get(name)
            .filter(|(_, n)| *n > 0)
            .map(|&(a, n)| a as f64 / n as f64)
    }
}

/// Posterior draws with cached log densities.
///
/// `per_individual` is stored draw-major: entries `d*M..(d+1)*M` belong to
/// draw `d`, in true-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub model: ModelId,
    pub m: usize,
    pub config: McmcConfig,
    pub draws: Vec<Draw>,
    pub loglik: Vec<f64>,
    /// Log density of the scalar-parameter prior.
    pub log_prior: Vec<f64>,
    /// Log density of the latent prior (z, u, S, L).
    pub log_latent_prior: Vec<f64>,
    pub per_individual: Vec<f64>,
    pub acceptance: Acceptance,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn individual_logliks(&self, d: usize) -> &[f64] {
        &self.per_individual[d * self.m..(d + 1) * self.m]
    }

    /// Unnormalised joint log posterior of draw `d`.
    pub fn log_posterior(&self, d: usize) -> f64 {
        self.loglik[d] + self.log_prior[d] + self.log_latent_prior[d]
    }

    /// Draws of one scalar parameter.
    pub fn series(&self, p: Param) -> Vec<f64> {
        self.draws.iter().map(|d| d.params.get(p)).collect()
    }

    /// Draws of the population size N = sum z.
    pub fn population_series(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.latent.n_real() as f64).collect()
    }

    /// Builds a chain from draws, computing every cache from the model.
    pub fn from_draws(
        model: ModelId,
        data: &CaptureDataset,
        prior: &PriorSpec,
        config: McmcConfig,
        draws: Vec<Draw>,
    ) -> Result<Chain> {
        let m = data.m();
        let mut chain = Chain {
            model,
            m,
            config,
            draws: Vec::with_capacity(draws.len()),
            loglik: Vec::with_capacity(draws.len()),
            log_prior: Vec::with_capacity(draws.len()),
            log_latent_prior: Vec::with_capacity(draws.len()),
            per_individual: Vec::with_capacity(draws.len() * m),
            acceptance: Acceptance::default(),
        };
        for d in draws {
            d.latent.validate(data.statespace())?;
            if d.latent.m() != m {
                return Err(Error::invariant("draw does not match augmentation bound M"));
            }
            let terms = crate::model::per_individual_log_likelihoods(model, data, &d.params, &d.latent);
            let mut total = 0.0;
            for t in &terms {
                total += t;
            }
            chain.loglik.push(total);
            chain.log_prior.push(crate::model::log_prior(model, &d.params, prior));
            chain
                .log_latent_prior
                .push(crate::model::log_latent_prior(model, &d.latent, &d.params, data.statespace()));
            chain.per_individual.extend(terms);
            chain.draws.push(d);
        }
        Ok(chain)
    }

    /// Recomputes the caches of the listed draws and returns the largest
    /// absolute discrepancy found.
    pub fn audit(&self, data: &CaptureDataset, prior: &PriorSpec, draws: &[usize]) -> f64 {
        let mut worst: f64 = 0.0;
        let gap = |a: f64, b: f64| {
            if a == b {
                0.0
            } else {
                (a - b).abs()
            }
        };
        for &d in draws {
            let draw = &self.draws[d];
            let ll = crate::model::log_likelihood(self.model, data, &draw.params, &draw.latent)
                .unwrap_or(f64::NAN);
            worst = worst.max(gap(ll, self.loglik[d]));
            let lp = crate::model::log_prior(self.model, &draw.params, prior);
            worst = worst.max(gap(lp, self.log_prior[d]));
            let llp = crate::model::log_latent_prior(self.model, &draw.latent, &draw.params, data.statespace());
            worst = worst.max(gap(llp, self.log_latent_prior[d]));
        }
        worst
    }
}
