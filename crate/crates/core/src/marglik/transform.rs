//! Unconstrained parameterisation used by the tuning densities.

use crate::model::{ModelId, ModelParams, PriorSpec};
use crate::numeric::{logit, sigmoid};

fn upper(p: crate::model::Param, prior: &PriorSpec) -> f64 {
    if p.is_length() {
        prior.r
    } else {
        1.0
    }
}

/// logit for probabilities, logit(sigma / R) for movement scales, in
/// `model.active_params()` order.
pub fn to_unconstrained(model: ModelId, params: &ModelParams, prior: &PriorSpec) -> Vec<f64> {
    model
        .active_params()
        .iter()
        .map(|&p| logit(params.get(p) / upper(p, prior)))
        .collect()
}

pub fn from_unconstrained(model: ModelId, x: &[f64], prior: &PriorSpec) -> ModelParams {
    let mut out = ModelParams::default();
    for (&p, &v) in model.active_params().iter().zip(x) {
        out.set(p, sigmoid(v) * upper(p, prior));
    }
    out
}

/// `log(sigmoid(x) * (1 - sigmoid(x)))`, stable for large |x|.
#[inline]
pub fn log_logistic_density(x: f64) -> f64 {
    let a = -x.abs();
    a - 2.0 * a.exp().ln_1p()
}

/// Prior density of the unconstrained coordinates. A Uniform(0, U) prior
/// pushed through logit(v / U) is the standard logistic density, so the
/// Jacobian cancels the 1/U factor.
pub fn log_prior_unconstrained(x: &[f64]) -> f64 {
    x.iter().map(|&v| log_logistic_density(v)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let prior = PriorSpec::new(4.0).unwrap();
        let mut p = ModelParams::default();
        p.psi = 0.3;
        p.theta = 0.6;
        p.phi = 0.8;
        p.omega0 = 0.02;
        p.sigma_m = 0.3;
        p.sigma_f = 0.15;
        let x = to_unconstrained(ModelId::M1, &p, &prior);
        let back = from_unconstrained(ModelId::M1, &x, &prior);
        for v in [back.psi - 0.3, back.theta - 0.6, back.omega0 - 0.02, back.sigma_f - 0.15] {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn logistic_density_integrates_to_one() {
        // midpoint rule over a wide interval
        let h = 1e-3;
        let total: f64 = (0..80_000)
            .map(|k| log_logistic_density(-40.0 + (k as f64 + 0.5) * h).exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        assert!((log_logistic_density(800.0) + 800.0).abs() < 1e-12);
    }
}
