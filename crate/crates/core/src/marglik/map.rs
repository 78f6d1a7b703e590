//! Joint posterior mode search by recombining stored draws.

use serde::{Deserialize, Serialize};

use crate::mcmc::Chain;
use crate::model::likelihood::{
    detection_loglik, dist2_row, link_admissible, observed_sex, sex_log_prob, PairStats,
    SexEvidence,
};
use crate::model::{
    log_latent_prior, log_prior, CaptureDataset, LatentState, ModelId,
    ModelParams, PriorSpec,
};

/// Best joint state found by [`map_refine`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEstimate {
    pub params: ModelParams,
    pub latent: LatentState,
    /// Unnormalised joint log posterior at the estimate.
    pub achieved: f64,
    pub n_rounds: usize,
}

/// Likelihood as a function of the scalars with the latent block held fixed.
struct FixedLatent {
    model: ModelId,
    k: usize,
    /// (d2 row, pair statistics, sex) of every real individual.
    real: Vec<(Vec<f64>, PairStats, bool)>,
    impossible: bool,
}

impl FixedLatent {
    fn new(model: ModelId, data: &CaptureDataset, latent: &LatentState) -> Self {
        let mut real = Vec::new();
        let mut impossible = false;
        for i in 0..data.m() {
            let r = latent.l.preimage(i);
            let stats = PairStats::from_rows(&data.rows1()[i], &data.rows2()[r]);
            if !latent.z[i] {
                impossible |= !stats.is_empty();
                continue;
            }
            impossible |= !link_admissible(data, i, r, &stats);
            if model.has_sex() {
                impossible |= match observed_sex(data, i, r) {
                    SexEvidence::Conflict => true,
                    SexEvidence::Known(v) => v != latent.u[i],
                    SexEvidence::Unknown => false,
                };
            }
            real.push((dist2_row(data, &latent.s[i]), stats, latent.u[i]));
        }
        FixedLatent {
            model,
            k: data.k(),
            real,
            impossible,
        }
    }

    fn loglik(&self, p: &ModelParams) -> f64 {
        if self.impossible {
            return f64::NEG_INFINITY;
        }
        let mut total = 0.0;
        for (d2, stats, male) in &self.real {
            let mut v = detection_loglik(self.model, p, p.sigma_for(self.model, *male), self.k, d2, stats);
            if self.model.has_sex() {
                v += sex_log_prob(p.theta, *male);
            }
            total += v;
        }
        total
    }
}

fn joint(
    model: ModelId,
    data: &CaptureDataset,
    prior: &PriorSpec,
    ll: f64,
    p: &ModelParams,
    latent: &LatentState,
) -> f64 {
    ll + log_prior(model, p, prior) + log_latent_prior(model, latent, p, data.statespace())
}

/// Starts from the draw with the highest joint log posterior, then
/// alternately tries every draw's scalars with the latent block fixed and
/// every draw's latent block with the scalars fixed, keeping strict
/// improvements, until a full round changes nothing.
pub fn map_refine(chain: &Chain, data: &CaptureDataset, prior: &PriorSpec) -> MapEstimate {
    let model = chain.model;
    assert!(!chain.is_empty(), "map_refine needs at least one draw");
    let start = (0..chain.len())
        .max_by(|&a, &b| chain.log_posterior(a).total_cmp(&chain.log_posterior(b)).then(b.cmp(&a)))
        .expect("non-empty chain");
    let mut params = chain.draws[start].params;
    let mut latent = chain.draws[start].latent.clone();
    let mut best = joint(
        model,
        data,
        prior,
        FixedLatent::new(model, data, &latent).loglik(&params),
        &params,
        &latent,
    );
    let mut rounds = 0;
    loop {
        rounds += 1;
        let mut improved = false;

        let fixed = FixedLatent::new(model, data, &latent);
        for d in &chain.draws {
            let v = joint(model, data, prior, fixed.loglik(&d.params), &d.params, &latent);
            if v > best {
                best = v;
                params = d.params;
                improved = true;
            }
        }
        for d in &chain.draws {
            let ll = FixedLatent::new(model, data, &d.latent).loglik(&params);
            let v = joint(model, data, prior, ll, &params, &d.latent);
            if v > best {
                best = v;
                latent = d.latent.clone();
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    MapEstimate {
        params,
        latent,
        achieved: best,
        n_rounds: rounds,
    }
}

/// Log-likelihood of every draw's scalars at the MAP latent state.
pub fn map_conditional_logliks(chain: &Chain, data: &CaptureDataset, map: &MapEstimate) -> Vec<f64> {
    let fixed = FixedLatent::new(chain.model, data, &map.latent);
    chain.draws.iter().map(|d| fixed.loglik(&d.params)).collect()
}
