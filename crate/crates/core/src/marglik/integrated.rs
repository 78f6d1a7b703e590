//! Likelihood with z and unobserved sexes summed out and activity centres
//! integrated over a grid, the identity permutation held fixed.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mcmc::Chain;
use crate::model::likelihood::{link_admissible, observed_sex, PairStats, SexEvidence};
use crate::model::{CaptureDataset, ModelId, ModelParams, Permutation, Point};
use crate::numeric::{log_add_exp, log_mean_exp, log_sum_exp, xlogp};

/// Per-cell log kernels for one movement scale.
struct Tables {
    /// log eta (arrival) or log p (direct), G x J.
    hit: Vec<f64>,
    /// log of the per-occasion no-record probability (arrival) or
    /// log(1 - p) (direct), G x J.
    miss: Vec<f64>,
    /// Detection log-likelihood of an individual never recorded, per cell.
    base: Vec<f64>,
    /// log mean over cells of exp(base).
    empty: f64,
}

impl Tables {
    fn new(model: ModelId, p: &ModelParams, sigma: f64, k: usize, d2: &[f64], j: usize) -> Self {
        let g_n = d2.len() / j;
        let mut hit = vec![0.0; d2.len()];
        let mut miss = vec![0.0; d2.len()];
        let mut base = vec![0.0; g_n];
        let kf = k as f64;
        let lw = p.baseline(model).ln();
        let inv = 1.0 / (2.0 * sigma * sigma);
        for g in 0..g_n {
            let mut acc = 0.0;
            for jj in 0..j {
                let c = g * j + jj;
                let lk = lw - d2[c] * inv;
                let lm = if model.uses_arrival() {
                    let phi = p.phi;
                    (1.0 - lk.exp() * phi * (2.0 - phi)).max(1e-300).ln()
                } else {
                    (-lk.exp()).ln_1p()
                };
                hit[c] = lk;
                miss[c] = lm;
                acc += lm;
            }
            base[g] = if model.uses_arrival() { kf * acc } else { 2.0 * kf * acc };
        }
        let empty = log_mean_exp(&base);
        Tables {
            hit,
            miss,
            base,
            empty,
        }
    }

    /// log mean over cells of the detection likelihood of a recorded pair.
    fn captured(&self, model: ModelId, p: &ModelParams, stats: &PairStats, j: usize) -> f64 {
        let tail = if model.uses_arrival() {
            let (y, n) = (stats.hits as f64, stats.any as f64);
            xlogp(y, p.phi.ln()) + xlogp(2.0 * n - y, (-p.phi).ln_1p())
        } else {
            0.0
        };
        let vals: Vec<f64> = self
            .base
            .iter()
            .enumerate()
            .map(|(g, &b)| {
                let mut v = b + tail;
                for t in &stats.traps {
                    let c = g * j + t.trap as usize;
                    let w = if model.uses_arrival() { t.any } else { t.hits } as f64;
                    v += w * (self.hit[c] - self.miss[c]);
                }
                v
            })
            .collect();
        log_mean_exp(&vals)
    }
}

/// Squared distances from every grid cell to every trap, G x J.
fn grid_distances(data: &CaptureDataset, grid: &[Point]) -> Vec<f64> {
    let j = data.j();
    let mut out = vec![0.0; grid.len() * j];
    for (g, s) in grid.iter().enumerate() {
        data.traps().dist2_row(s, &mut out[g * j..(g + 1) * j]);
    }
    out
}

fn evaluate(
    model: ModelId,
    data: &CaptureDataset,
    p: &ModelParams,
    l: &Permutation,
    d2: &[f64],
) -> f64 {
    let j = data.j();
    let k = data.k();
    // (log weight, tables) per sex class; a single class without sex.
    let classes: Vec<(Option<bool>, f64, Tables)> = if model.has_sex() {
        vec![
            (Some(true), p.theta.ln(), Tables::new(model, p, p.sigma_m, k, d2, j)),
            (Some(false), (-p.theta).ln_1p(), Tables::new(model, p, p.sigma_f, k, d2, j)),
        ]
    } else {
        vec![(None, 0.0, Tables::new(model, p, p.sigma, k, d2, j))]
    };
    let (log_psi, log_not) = (p.psi.ln(), (-p.psi).ln_1p());
    let mut total = 0.0;
    for i in 0..data.m() {
        let r = l.preimage(i);
        let stats = PairStats::from_rows(&data.rows1()[i], &data.rows2()[r]);
        if !link_admissible(data, i, r, &stats) {
            return f64::NEG_INFINITY;
        }
        let allowed = |sex: Option<bool>| -> bool {
            match (sex, model.has_sex()) {
                (_, false) => true,
                (Some(u), true) => match observed_sex(data, i, r) {
                    SexEvidence::Unknown => true,
                    SexEvidence::Known(v) => v == u,
                    SexEvidence::Conflict => false,
                },
                (None, true) => unreachable!(),
            }
        };
        let mut real = Vec::with_capacity(2);
        let mut phantom = Vec::with_capacity(2);
        for (sex, w, tab) in &classes {
            if !allowed(*sex) {
                continue;
            }
            let det = if stats.is_empty() { tab.empty } else { tab.captured(model, p, &stats, j) };
            real.push(w + det);
            phantom.push(*w);
        }
        if real.is_empty() {
            return f64::NEG_INFINITY;
        }
        let term = log_psi + log_sum_exp(&real);
        total += if stats.is_empty() {
            log_add_exp(log_not + log_sum_exp(&phantom), term)
        } else {
            term
        };
    }
    total
}

/// Integrated log-likelihood of scalars `mu_p` under identity linkage `l`,
/// with each activity centre averaged over the cells of `grid`.
pub fn integrated_log_likelihood(
    model: ModelId,
    data: &CaptureDataset,
    mu_p: &ModelParams,
    l: &Permutation,
    grid: &[Point],
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::arg("integration grid is empty"));
    }
    if l.len() != data.m() {
        return Err(Error::invariant("permutation length differs from M"));
    }
    Ok(evaluate(model, data, mu_p, l, &grid_distances(data, grid)))
}

/// Integrated log-likelihood of every draw (its scalars and its linkage).
pub fn integrated_log_likelihoods(chain: &Chain, data: &CaptureDataset, grid: &[Point]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::arg("integration grid is empty"));
    }
    let d2 = grid_distances(data, grid);
    Ok(chain
        .draws
        .par_iter()
        .map(|d| evaluate(chain.model, data, &d.params, &d.latent.l, &d2))
        .collect())
}
