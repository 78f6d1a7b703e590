//! Marginal likelihoods: Gelfand-Dey under the MAP and integrated-likelihood
//! approximations, and the harmonic mean.

mod integrated;
mod map;
pub mod transform;
pub mod tuning;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::Chain;
use crate::model::{CaptureDataset, Point, PriorSpec};
use crate::numeric::{batch_means_se, log_mean_exp};

pub use integrated::{integrated_log_likelihood, integrated_log_likelihoods};
pub use map::{map_conditional_logliks, map_refine, MapEstimate};
pub use transform::{from_unconstrained, log_prior_unconstrained, to_unconstrained};
pub use tuning::{fit_tuning, TuningDensity, TuningKind};

/// Fraction of dropped draws above which an estimate is flagged.
pub const MAX_DROPPED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    GdMap,
    GdIl,
    Hm,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::GdMap => "GD-MAP",
            Method::GdIl => "GD-IL",
            Method::Hm => "HM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "GD-MAP" => Ok(Method::GdMap),
            "GD-IL" => Ok(Method::GdIl),
            "HM" => Ok(Method::Hm),
            _ => Err(Error::arg(format!("unknown estimator `{s}`"))),
        }
    }
}

/// A log marginal likelihood estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMarginal {
    pub value: f64,
    pub method: Method,
    pub tuning: Option<TuningKind>,
    /// Batch-means standard error of `value`.
    pub mc_se: f64,
    /// Draws whose summand was +inf or NaN.
    pub dropped: usize,
    pub unreliable: bool,
}

/// Log Bayes factor of `a` against `b`.
pub fn bayes_factor(a: &LogMarginal, b: &LogMarginal) -> f64 {
    a.value - b.value
}

/// Generic Gelfand-Dey estimator.
///
/// For each draw `d` the summand is `log g(x_d) - log pi(x_d) - loglik[d]`,
/// and the estimate is minus the log of their exponentiated mean. With the
/// prior as tuning density the first difference is exactly zero and the
/// result is the harmonic mean of the likelihoods.
pub fn gelfand_dey(
    xs: &[Vec<f64>],
    loglik: &[f64],
    log_prior_x: &[f64],
    tuning: &TuningDensity,
    method: Method,
) -> Result<LogMarginal> {
    if xs.len() != loglik.len() || xs.len() != log_prior_x.len() {
        return Err(Error::invariant("draw, likelihood and prior vectors differ in length"));
    }
    let terms: Vec<f64> = xs
        .iter()
        .zip(loglik)
        .zip(log_prior_x)
        .map(|((x, &ll), &lp)| {
            let lg = if tuning.kind == TuningKind::Prior { lp } else { tuning.log_density(x) };
            (lg - lp) - ll
        })
        .collect();
    estimate_from_terms(&terms, method, Some(tuning.kind))
}

/// Turns per-draw log summands into an estimate of `-log mean exp(terms)`.
pub fn estimate_from_terms(
    terms: &[f64],
    method: Method,
    tuning: Option<TuningKind>,
) -> Result<LogMarginal> {
    let fail = |reason: &str| Error::EstimationFailed {
        method: method.label().into(),
        tuning: tuning.map(|t| t.label()).unwrap_or_else(|| "none".into()),
        reason: reason.into(),
    };
    if terms.is_empty() {
        return Err(fail("no draws"));
    }
    // -inf summands (tuning density zero) belong to the mean; +inf and NaN
    // come from zero likelihoods and are dropped.
    let kept: Vec<f64> = terms.iter().copied().filter(|t| !t.is_nan() && *t != f64::INFINITY).collect();
    let dropped = terms.len() - kept.len();
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} draws with non-finite summands", method.label());
    }
    if kept.iter().all(|t| *t == f64::NEG_INFINITY) {
        return Err(fail("every summand is -inf"));
    }
    let lme = log_mean_exp(&kept);
    let top = kept.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = kept.iter().map(|t| (t - top).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let mc_se = batch_means_se(&scaled) / mean;
    Ok(LogMarginal {
        value: -lme,
        method,
        tuning,
        mc_se,
        dropped,
        unreliable: dropped as f64 > MAX_DROPPED_FRACTION * terms.len() as f64,
    })
}

/// Unconstrained scalar draws of a chain.
pub fn transformed_draws(chain: &Chain, prior: &PriorSpec) -> Vec<Vec<f64>> {
    chain
        .draws
        .iter()
        .map(|d| to_unconstrained(chain.model, &d.params, prior))
        .collect()
}

/// Harmonic mean of the cached complete-data likelihoods.
pub fn harmonic_mean(chain: &Chain) -> Result<LogMarginal> {
    let terms: Vec<f64> = chain.loglik.iter().map(|ll| -ll).collect();
    estimate_from_terms(&terms, Method::Hm, None)
}

/// Gelfand-Dey with the latent block fixed at the MAP estimate.
///
/// `map_loglik[d]` is the log-likelihood of draw `d`'s scalars at the MAP
/// latent state. With the prior as tuning density the full-draw
/// likelihoods are used instead, which is the harmonic mean estimator.
pub fn gd_map_with(
    chain: &Chain,
    prior: &PriorSpec,
    tuning: &TuningDensity,
    map_loglik: &[f64],
) -> Result<LogMarginal> {
    let xs = transformed_draws(chain, prior);
    let lp: Vec<f64> = xs.iter().map(|x| log_prior_unconstrained(x)).collect();
    let ll = if tuning.kind == TuningKind::Prior { &chain.loglik[..] } else { map_loglik };
    gelfand_dey(&xs, ll, &lp, tuning, Method::GdMap)
}

pub fn gd_map(
    chain: &Chain,
    data: &CaptureDataset,
    prior: &PriorSpec,
    tuning: &TuningDensity,
    map: &MapEstimate,
) -> Result<LogMarginal> {
    let ll = map_conditional_logliks(chain, data, map);
    gd_map_with(chain, prior, tuning, &ll)
}

/// Gelfand-Dey on the integrated likelihoods `il[d]` of each draw.
pub fn gd_il_with(
    chain: &Chain,
    prior: &PriorSpec,
    tuning: &TuningDensity,
    il: &[f64],
) -> Result<LogMarginal> {
    let xs = transformed_draws(chain, prior);
    let lp: Vec<f64> = xs.iter().map(|x| log_prior_unconstrained(x)).collect();
    gelfand_dey(&xs, il, &lp, tuning, Method::GdIl)
}

pub fn gd_il(
    chain: &Chain,
    data: &CaptureDataset,
    prior: &PriorSpec,
    tuning: &TuningDensity,
    grid: &[Point],
) -> Result<LogMarginal> {
    let il = integrated_log_likelihoods(chain, data, grid)?;
    gd_il_with(chain, prior, tuning, &il)
}

/// Fits a tuning density of `kind` to the chain's unconstrained scalars.
pub fn fit_chain_tuning(chain: &Chain, prior: &PriorSpec, kind: TuningKind) -> Result<TuningDensity> {
    fit_tuning(&transformed_draws(chain, prior), kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_likelihood_gives_its_value() {
        let c = -3.7;
        let r = estimate_from_terms(&vec![-c; 50], Method::Hm, None).unwrap();
        assert!((r.value - c).abs() < 1e-14);
        assert_eq!(r.mc_se, 0.0);
    }

    #[test]
    fn harmonic_mean_of_c_and_half_c() {
        // likelihoods c and c/2: 2 / (1/c + 2/c) = 2c/3
        let lc: f64 = 0.8f64.ln();
        let terms = [-lc, -(lc - 2f64.ln())];
        let r = estimate_from_terms(&terms, Method::Hm, None).unwrap();
        assert!((r.value - (2.0 * 0.8 / 3.0f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn failures_and_drops() {
        let err = estimate_from_terms(&[f64::NEG_INFINITY; 4], Method::GdMap, Some(TuningKind::Normal));
        assert!(matches!(err, Err(Error::EstimationFailed { .. })));
        let r = estimate_from_terms(&[1.0, f64::INFINITY, 1.0], Method::Hm, None).unwrap();
        assert_eq!(r.dropped, 1);
        assert!(r.unreliable);
    }

    #[test]
    fn bayes_factor_is_a_difference() {
        let mk = |v: f64| LogMarginal { value: v, method: Method::Hm, tuning: None, mc_se: 0.0, dropped: 0, unreliable: false };
        assert_eq!(bayes_factor(&mk(2f64.ln()), &mk(0.0)), 2f64.ln());
        assert_eq!(bayes_factor(&mk(1.5), &mk(1.5)), 0.0);
    }
}
