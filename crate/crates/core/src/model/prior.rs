//! Priors on scalar parameters and latent variables.

use super::types::{LatentState, ModelId, ModelParams, Param, PriorSpec, StateSpace};
use crate::numeric::xlogp;

/// Log density of the independent Uniform priors on the active parameters.
pub fn log_prior(model: ModelId, params: &ModelParams, prior: &PriorSpec) -> f64 {
    let mut out = 0.0;
    for &p in model.active_params() {
        let v = params.get(p);
        let hi = if p.is_length() { prior.r } else { 1.0 };
        if !(v > 0.0 && v < hi) {
            return f64::NEG_INFINITY;
        }
        if p.is_length() {
            out -= prior.r.ln();
        }
    }
    out
}

/// `log M!` by direct summation (M is at most a few thousand).
pub fn ln_factorial(m: usize) -> f64 {
    (2..=m).map(|v| (v as f64).ln()).sum()
}

/// Log density of the latent block: Bernoulli(psi) inclusion, uniform
/// activity centres, uniform permutation and, for sex models, the sex of
/// phantom individuals (real individuals carry theta in the likelihood).
pub fn log_latent_prior(
    model: ModelId,
    latent: &LatentState,
    params: &ModelParams,
    statespace: &StateSpace,
) -> f64 {
    let m = latent.m();
    let psi = params.get(Param::Psi);
    let n = latent.n_real() as f64;
    let mut out = xlogp(n, psi.ln()) + xlogp(m as f64 - n, (-psi).ln_1p());
    if model.has_sex() {
        let theta = params.theta;
        let (mut males, mut females) = (0.0, 0.0);
        for (&z, &u) in latent.z.iter().zip(&latent.u) {
            if !z {
                if u {
                    males += 1.0;
                } else {
                    females += 1.0;
                }
            }
        }
        out += xlogp(males, theta.ln()) + xlogp(females, (-theta).ln_1p());
    }
    if latent.s.iter().any(|p| !statespace.contains(p)) {
        return f64::NEG_INFINITY;
    }
    out - m as f64 * statespace.area().ln() - ln_factorial(m)
}
