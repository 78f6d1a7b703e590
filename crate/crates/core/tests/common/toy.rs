//! A small occupancy model with two scalar parameters whose marginal
//! likelihood is computed exactly by enumerating all 2^n occupancy vectors.
//!
//! Sites are occupied with probability psi; an occupied site records a
//! detection on each of `k` visits with probability p, an empty one with a
//! known false-positive rate. Both parameters get Uniform(0, 1) priors.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use secr_core::numeric::{log_sum_exp, logit};
use statrs::function::beta::ln_beta;

pub struct Toy {
    pub detections: Vec<u32>,
    pub k: u32,
    pub false_rate: f64,
}

impl Toy {
    pub fn new(detections: Vec<u32>, k: u32) -> Self {
        Toy { detections, k, false_rate: 0.05 }
    }

    fn states(&self) -> impl Iterator<Item = Vec<bool>> + '_ {
        let n = self.detections.len();
        (0..1u32 << n).map(move |mask| (0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    /// log of the marginal likelihood contribution of one occupancy vector,
    /// with psi and p integrated against their uniform priors.
    fn log_state_weight(&self, z: &[bool]) -> f64 {
        let n = z.len() as f64;
        let (mut s, mut hits, mut false_hits, mut empty_visits) = (0.0, 0.0, 0.0, 0.0);
        for (&occ, &d) in z.iter().zip(&self.detections) {
            if occ {
                s += 1.0;
                hits += d as f64;
            } else {
                false_hits += d as f64;
                empty_visits += self.k as f64;
            }
        }
        let k = self.k as f64;
        ln_beta(1.0 + s, 1.0 + n - s)
            + ln_beta(1.0 + hits, 1.0 + k * s - hits)
            + false_hits * self.false_rate.ln()
            + (empty_visits - false_hits) * (-self.false_rate).ln_1p()
    }

    /// Exact log marginal likelihood.
    pub fn log_marginal(&self) -> f64 {
        let w: Vec<f64> = self.states().map(|z| self.log_state_weight(&z)).collect();
        log_sum_exp(&w)
    }

    /// Likelihood with occupancy summed out.
    pub fn log_lik(&self, psi: f64, p: f64) -> f64 {
        let k = self.k as f64;
        let e = self.false_rate;
        self.detections
            .iter()
            .map(|&d| {
                let d = d as f64;
                let occ = psi * p.powf(d) * (1.0 - p).powf(k - d);
                let empty = (1.0 - psi) * e.powf(d) * (1.0 - e).powf(k - d);
                (occ + empty).ln()
            })
            .sum()
    }

    /// Independent exact posterior draws of (psi, p): occupancy from its
    /// enumerated marginal, then the two conjugate Beta conditionals.
    pub fn posterior_draws<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<(f64, f64)> {
        let states: Vec<Vec<bool>> = self.states().collect();
        let w: Vec<f64> = states.iter().map(|z| self.log_state_weight(z)).collect();
        let total = log_sum_exp(&w);
        let probs: Vec<f64> = w.iter().map(|v| (v - total).exp()).collect();
        let nsites = self.detections.len() as f64;
        let k = self.k as f64;
        (0..n)
            .map(|_| {
                let mut u: f64 = rng.random();
                let mut pick = states.len() - 1;
                for (i, q) in probs.iter().enumerate() {
                    if u < *q {
                        pick = i;
                        break;
                    }
                    u -= q;
                }
                let z = &states[pick];
                let s = z.iter().filter(|&&v| v).count() as f64;
                let hits: f64 = z
                    .iter()
                    .zip(&self.detections)
                    .filter(|(o, _)| **o)
                    .map(|(_, &d)| d as f64)
                    .sum();
                let psi = Beta::new(1.0 + s, 1.0 + nsites - s).unwrap().sample(rng);
                let p = Beta::new(1.0 + hits, 1.0 + k * s - hits).unwrap().sample(rng);
                (psi, p)
            })
            .collect()
    }

    /// Draws on the logit scale, with their log-likelihoods.
    pub fn unconstrained<R: Rng>(&self, rng: &mut R, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.posterior_draws(rng, n)
            .into_iter()
            .map(|(psi, p)| (vec![logit(psi), logit(p)], self.log_lik(psi, p)))
            .unzip()
    }
}
