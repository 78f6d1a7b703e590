//! Information criteria computed from posterior draws: DIC with two
//! penalties, WAIC with three, and the posterior predictive loss D∞.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marglik::MapEstimate;
use crate::mcmc::{Chain, Draw};
use crate::model::{detection::half_normal, log_likelihood, CaptureDataset, ModelId};
use crate::numeric::{log_mean_exp, mix_seed, NeumaierSum};

/// Default draw thinning for replicate simulation.
pub const PPL_THIN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    Dic1,
    Dic2,
    Waic1,
    Waic2,
    Waic3,
    Ppl,
}

impl Criterion {
    pub const ALL: [Criterion; 6] = [
        Criterion::Dic1,
        Criterion::Dic2,
        Criterion::Waic1,
        Criterion::Waic2,
        Criterion::Waic3,
        Criterion::Ppl,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Criterion::Dic1 => "DIC1",
            Criterion::Dic2 => "DIC2",
            Criterion::Waic1 => "WAIC1",
            Criterion::Waic2 => "WAIC2",
            Criterion::Waic3 => "WAIC3",
            Criterion::Ppl => "PPL",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::arg(format!("unknown criterion `{s}`")))
    }
}

/// Which end of a score scale is preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Smaller,
    Larger,
}

impl Direction {
    /// `Less` when `a` is preferred over `b`.
    pub fn compare(self, a: f64, b: f64) -> Ordering {
        match self {
            Direction::Smaller => a.total_cmp(&b),
            Direction::Larger => b.total_cmp(&a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub criterion: Criterion,
    pub value: f64,
    pub penalty: f64,
    /// Deviance-type goodness-of-fit part; `value = fit_term + 2 * penalty`
    /// for DIC and WAIC, `fit_term + penalty` for D∞.
    pub fit_term: f64,
    /// Every `thin`-th draw was used (1 for the deviance criteria).
    pub thin: usize,
    pub seed: Option<u64>,
}

impl CriterionResult {
    /// All criteria prefer smaller values.
    pub fn direction(&self) -> Direction {
        Direction::Smaller
    }
}

fn mean_of(xs: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut acc = NeumaierSum::default();
    let mut n = 0;
    for x in xs {
        acc.add(x);
        n += 1;
    }
    (acc.total() / n as f64, n)
}

/// DIC from the per-draw total log-likelihoods and the log-likelihood at
/// the point estimate.
pub fn dic_from(loglik: &[f64], ll_hat: f64, variant: u8) -> Result<CriterionResult> {
    if loglik.is_empty() {
        return Err(Error::arg("DIC needs at least one draw"));
    }
    let (mean, n) = mean_of(loglik.iter().copied());
    let (criterion, p) = match variant {
        1 => (Criterion::Dic1, 2.0 * ll_hat - 2.0 * mean),
        2 => {
            let (var, _) = mean_of(loglik.iter().map(|v| (v - mean) * (v - mean)));
            debug_assert_eq!(n, loglik.len());
            (Criterion::Dic2, 2.0 * var)
        }
        _ => return Err(Error::arg(format!("DIC variant must be 1 or 2, got {variant}"))),
    };
    let fit = -2.0 * ll_hat;
    Ok(CriterionResult {
        criterion,
        value: fit + 2.0 * p,
        penalty: p,
        fit_term: fit,
        thin: 1,
        seed: None,
    })
}

/// DIC anchored at the MAP joint state.
pub fn dic(chain: &Chain, data: &CaptureDataset, map: &MapEstimate, variant: u8) -> Result<CriterionResult> {
    let ll_hat = log_likelihood(chain.model, data, &map.params, &map.latent)?;
    dic_from(&chain.loglik, ll_hat, variant)
}

/// WAIC summaries of one individual's column of log-likelihoods.
struct Column {
    log_mean_lik: f64,
    mean_log: f64,
    var: f64,
    mean_abs_dev: f64,
}

fn column(xs: &[f64]) -> Column {
    let (mean_log, _) = mean_of(xs.iter().copied());
    let (var, _) = mean_of(xs.iter().map(|v| (v - mean_log) * (v - mean_log)));
    let (mad, _) = mean_of(xs.iter().map(|v| (v - mean_log).abs()));
    Column {
        log_mean_lik: log_mean_exp(xs),
        mean_log,
        var,
        mean_abs_dev: mad,
    }
}

/// All three WAIC variants from a draw-major `n_draws x m` matrix of
/// per-individual log-likelihoods.
pub fn waic_from(per_individual: &[f64], m: usize) -> Result<[CriterionResult; 3]> {
    if m == 0 || per_individual.is_empty() || per_individual.len() % m != 0 {
        return Err(Error::arg("per-individual log-likelihoods do not form a draws x M matrix"));
    }
    let n = per_individual.len() / m;
    let mut lppd = NeumaierSum::default();
    let mut p = [NeumaierSum::default(); 3];
    let mut col = vec![0.0; n];
    for i in 0..m {
        for (d, c) in col.iter_mut().enumerate() {
            *c = per_individual[d * m + i];
        }
        let s = column(&col);
        if s.log_mean_lik == f64::NEG_INFINITY {
            return Err(Error::DegenerateIndividual { row: i });
        }
        lppd.add(s.log_mean_lik);
        p[0].add(2.0 * (s.log_mean_lik - s.mean_log));
        p[1].add(s.var);
        p[2].add(2.0 * s.mean_abs_dev);
    }
    let fit = -2.0 * lppd.total();
    let make = |criterion, penalty: f64| CriterionResult {
        criterion,
        value: fit + 2.0 * penalty,
        penalty,
        fit_term: fit,
        thin: 1,
        seed: None,
    };
    Ok([
        make(Criterion::Waic1, p[0].total()),
        make(Criterion::Waic2, p[1].total()),
        make(Criterion::Waic3, p[2].total()),
    ])
}

pub fn waic(chain: &Chain, variant: u8) -> Result<CriterionResult> {
    if !(1..=3).contains(&variant) {
        return Err(Error::arg(format!("WAIC variant must be 1, 2 or 3, got {variant}")));
    }
    let [a, b, c] = waic_from(&chain.per_individual, chain.m)?;
    Ok([a, b, c].into_iter().nth(variant as usize - 1).expect("variant checked"))
}

/// Single-pass WAIC1 and WAIC2: running log-sum-exp and Welford moments per
/// individual. The absolute-deviation penalty needs the final mean, so it
/// is not available here.
#[derive(Debug, Clone)]
pub struct WaicStream {
    n: usize,
    max: Vec<f64>,
    scaled: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl WaicStream {
    pub fn new(m: usize) -> Self {
        WaicStream {
            n: 0,
            max: vec![f64::NEG_INFINITY; m],
            scaled: vec![0.0; m],
            mean: vec![0.0; m],
            m2: vec![0.0; m],
        }
    }

    pub fn push(&mut self, draw: &[f64]) {
        assert_eq!(draw.len(), self.max.len(), "draw length differs from M");
        self.n += 1;
        let n = self.n as f64;
        for (i, &x) in draw.iter().enumerate() {
            if x > self.max[i] {
                self.scaled[i] = self.scaled[i] * (self.max[i] - x).exp() + 1.0;
                self.max[i] = x;
            } else if x > f64::NEG_INFINITY {
                self.scaled[i] += (x - self.max[i]).exp();
            }
            let delta = x - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x - self.mean[i]);
        }
    }

    /// (WAIC1, WAIC2) totals.
    pub fn finish(&self) -> Result<(f64, f64)> {
        if self.n == 0 {
            return Err(Error::arg("no draws pushed"));
        }
        let n = self.n as f64;
        let mut lppd = NeumaierSum::default();
        let mut p1 = NeumaierSum::default();
        let mut p2 = NeumaierSum::default();
        for i in 0..self.max.len() {
            if self.max[i] == f64::NEG_INFINITY {
                return Err(Error::DegenerateIndividual { row: i });
            }
            let lml = self.max[i] + (self.scaled[i] / n).ln();
            lppd.add(lml);
            p1.add(2.0 * (lml - self.mean[i]));
            p2.add(self.m2[i] / n);
        }
        let fit = -2.0 * lppd.total();
        Ok((fit + 2.0 * p1.total(), fit + 2.0 * p2.total()))
    }
}

/// Stable 64-bit key of one individual's latent state, so its replicate
/// stream does not depend on where it sits among the augmented rows.
fn individual_key(draw: &Draw, i: usize) -> u64 {
    let l = &draw.latent;
    let s = l.s[i];
    let tag = (l.z[i] as u64) | (l.u[i] as u64) << 1;
    mix_seed(mix_seed(s.x.to_bits(), s.y.to_bits()), tag)
}

/// Ones per cell over the replicates of one draw, appended to `counts`.
fn replicate_draw(
    model: ModelId,
    data: &CaptureDataset,
    draw: &Draw,
    seed: u64,
    d: usize,
    counts: &mut [u32],
) {
    let (m, j_n, k_n) = (data.m(), data.j(), data.k());
    let half = m * j_n * k_n;
    let p = &draw.params;
    let lat = &draw.latent;
    let mut d2 = vec![0.0; j_n];
    for i in 0..m {
        if !lat.z[i] {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(seed, d as u64), individual_key(draw, i)));
        let r = lat.l.preimage(i);
        let sigma = p.sigma_for(model, lat.u[i]);
        data.traps().dist2_row(&lat.s[i], &mut d2);
        for (j, &dist2) in d2.iter().enumerate() {
            let q = half_normal(p.baseline(model), sigma, dist2);
            for k in 0..k_n {
                let (a, b) = if model.uses_arrival() {
                    if rng.random::<f64>() < q {
                        (rng.random::<f64>() < p.phi, rng.random::<f64>() < p.phi)
                    } else {
                        (false, false)
                    }
                } else {
                    (rng.random::<f64>() < q, rng.random::<f64>() < q)
                };
                counts[(i * j_n + j) * k_n + k] += a as u32;
                counts[half + (r * j_n + j) * k_n + k] += b as u32;
            }
        }
    }
}

/// Ones per cell of `Y_vec` across one replicate per used draw, and the
/// number of replicates.
pub fn replicate_counts(chain: &Chain, data: &CaptureDataset, seed: u64, thin: usize) -> Result<(Vec<u32>, usize)> {
    if chain.is_empty() {
        return Err(Error::arg("posterior predictive loss needs at least one draw"));
    }
    if thin == 0 {
        return Err(Error::arg("thinning factor must be positive"));
    }
    let cells = 2 * data.m() * data.j() * data.k();
    let used: Vec<usize> = (0..chain.len()).step_by(thin).collect();
    let counts = used
        .par_iter()
        .fold(
            || vec![0u32; cells],
            |mut acc, &d| {
                replicate_draw(chain.model, data, &chain.draws[d], seed, d, &mut acc);
                acc
            },
        )
        .reduce(
            || vec![0u32; cells],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok((counts, used.len()))
}

/// D∞ from replicate counts against the observed `Y_vec`.
pub fn ppl_from_counts(observed: &[u8], counts: &[u32], n_rep: usize) -> (f64, f64) {
    let n = n_rep as f64;
    let mut fit = NeumaierSum::default();
    let mut pen = NeumaierSum::default();
    for (&y, &c) in observed.iter().zip(counts) {
        let mean = c as f64 / n;
        fit.add((y as f64 - mean).powi(2));
        pen.add(mean * (1.0 - mean));
    }
    (fit.total(), pen.total())
}

/// Posterior predictive loss D∞, simulating one replicate data set from
/// every `thin`-th draw conditional on that draw's full state.
pub fn posterior_predictive_loss(
    chain: &Chain,
    data: &CaptureDataset,
    seed: u64,
    thin: usize,
) -> Result<CriterionResult> {
    let (counts, n_rep) = replicate_counts(chain, data, seed, thin)?;
    let mut observed = data.y1().to_vec();
    observed.extend_from_slice(data.y2());
    let (fit, penalty) = ppl_from_counts(&observed, &counts, n_rep);
    Ok(CriterionResult {
        criterion: Criterion::Ppl,
        value: fit + penalty,
        penalty,
        fit_term: fit,
        thin,
        seed: Some(seed),
    })
}

/// Every criterion for one fitted chain.
pub fn all_criteria(
    chain: &Chain,
    data: &CaptureDataset,
    map: &MapEstimate,
    seed: u64,
    thin: usize,
) -> Result<Vec<CriterionResult>> {
    let ll_hat = log_likelihood(chain.model, data, &map.params, &map.latent)?;
    let mut out = vec![dic_from(&chain.loglik, ll_hat, 1)?, dic_from(&chain.loglik, ll_hat, 2)?];
    out.extend(waic_from(&chain.per_individual, chain.m)?);
    out.push(posterior_predictive_loss(chain, data, seed, thin)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dic_of_two_draws() {
        let l = -40.0;
        let d1 = dic_from(&[l, l - 2.0], l, 1).unwrap();
        let d2 = dic_from(&[l, l - 2.0], l, 2).unwrap();
        assert_eq!(d1.penalty, 2.0);
        assert_eq!(d2.penalty, 2.0);
        assert_eq!(d1.value, -2.0 * l + 4.0);
        let flat = dic_from(&[l; 5], l, 1).unwrap();
        assert_eq!((flat.penalty, flat.value), (0.0, -2.0 * l));
        assert!(dic_from(&[l], l, 3).is_err());
    }

    #[test]
    fn waic_single_draw_has_no_penalty() {
        let r = waic_from(&[-1.0, -2.5, 0.0], 3).unwrap();
        for c in r {
            assert_eq!(c.penalty, 0.0);
            assert_eq!(c.value, 7.0);
        }
    }

    #[test]
    fn degenerate_individual_is_named() {
        let err = waic_from(&[0.0, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY], 2).unwrap_err();
        assert!(matches!(err, Error::DegenerateIndividual { row: 1 }));
    }

    #[test]
    fn comparator_prefers_smaller() {
        assert_eq!(Direction::Smaller.compare(1.0, 2.0), Ordering::Less);
        assert_eq!(Direction::Larger.compare(1.0, 2.0), Ordering::Greater);
        assert_eq!("waic2".parse::<Criterion>().unwrap(), Criterion::Waic2);
    }

    #[test]
    fn ppl_counts_arithmetic() {
        // two cells, four replicates
        let (fit, pen) = ppl_from_counts(&[1, 0], &[4, 1], 4);
        assert_eq!(fit, 0.0 + 0.0625);
        assert_eq!(pen, 0.0 + 0.1875);
    }
}
