//! Complete-data likelihood of the two-detector capture arrays.

use super::data::{CaptureDataset, RowCaptures};
use super::types::{LatentState, ModelId, ModelParams, Point};
use crate::error::{Error, Result};
use crate::numeric::{xlogp, NeumaierSum};

/// Lower clamp for the per-occasion "no record" probability before logging.
const MIN_PROB: f64 = 1e-300;

/// Capture summary of one trap for a linked pair of rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrapStat {
    pub trap: u32,
    /// Occasions with at least one record.
    pub any: u32,
    /// Total records over both detectors.
    pub hits: u32,
}

/// Sparse summary of a detector-1 row joined with a detector-2 row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairStats {
    /// Traps with at least one record, sorted by trap.
    pub traps: Vec<TrapStat>,
    pub any: u32,
    pub hits: u32,
    /// Cells recorded by both detectors.
    pub coincident: u32,
}

impl PairStats {
    pub fn from_rows(a: &RowCaptures, b: &RowCaptures) -> Self {
        let (a, b) = (a.cells(), b.cells());
        let mut out = PairStats::default();
        let (mut p, mut q) = (0, 0);
        while p < a.len() || q < b.len() {
            let (cell, n_hits) = match (a.get(p), b.get(q)) {
                (Some(x), Some(y)) if x == y => {
                    p += 1;
                    q += 1;
                    out.coincident += 1;
                    (*x, 2)
                }
                (Some(x), Some(y)) if x < y => {
                    p += 1;
                    (*x, 1)
                }
                (Some(x), None) => {
                    p += 1;
                    (*x, 1)
                }
                (_, Some(y)) => {
                    q += 1;
                    (*y, 1)
                }
                (None, None) => unreachable!(),
            };
            out.any += 1;
            out.hits += n_hits;
            match out.traps.last_mut() {
                Some(t) if t.trap == cell.0 => {
                    t.any += 1;
                    t.hits += n_hits;
                }
                _ => out.traps.push(TrapStat {
                    trap: cell.0,
                    any: 1,
                    hits: n_hits,
                }),
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.any == 0
    }
}

/// Sex evidence carried by a linked pair of rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SexEvidence {
    Unknown,
    Known(bool),
    Conflict,
}

/// Combines the labels of detector-1 row `i` and detector-2 row `r`.
pub fn observed_sex(data: &CaptureDataset, i: usize, r: usize) -> SexEvidence {
    match (data.sex1()[i], data.sex2()[r]) {
        (None, None) => SexEvidence::Unknown,
        (Some(a), None) | (None, Some(a)) => SexEvidence::Known(a),
        (Some(a), Some(b)) if a == b => SexEvidence::Known(a),
        _ => SexEvidence::Conflict,
    }
}

/// Whether linking detector-1 row `i` with detector-2 row `r` is allowed.
///
/// Fully identified rows may only be linked to their own partner, and any
/// other pair that shares a cell would have been fully identified.
pub fn link_admissible(data: &CaptureDataset, i: usize, r: usize, stats: &PairStats) -> bool {
    let nf = data.n_full();
    if i < nf || r < nf {
        return i == r;
    }
    stats.coincident == 0
}

/// Detection log-likelihood of one real individual given its squared trap
/// distances `d2` and its pair statistics. `sigma` is the individual's scale.
pub fn detection_loglik(
    model: ModelId,
    params: &ModelParams,
    sigma: f64,
    k: usize,
    d2: &[f64],
    stats: &PairStats,
) -> f64 {
    let kf = k as f64;
    let mut acc = NeumaierSum::default();
    let mut caps = stats.traps.iter().peekable();
    if model.uses_arrival() {
        let phi = params.phi;
        let lw = params.omega0.ln();
        // per-occasion probability that neither detector records
        let miss = phi * (2.0 - phi);
        for (j, &dd) in d2.iter().enumerate() {
            let eta = (lw - dd / (2.0 * sigma * sigma)).exp();
            let c = (1.0 - eta * miss).max(MIN_PROB);
            let lc = c.ln();
            match caps.peek() {
                Some(t) if t.trap as usize == j => {
                    let n = t.any as f64;
                    let leta = lw - dd / (2.0 * sigma * sigma);
                    acc.add(n * leta + (kf - n) * lc);
                    caps.next();
                }
                _ => acc.add(kf * lc),
            }
        }
        let (y, n) = (stats.hits as f64, stats.any as f64);
        acc.add(xlogp(y, phi.ln()) + xlogp(2.0 * n - y, (-phi).ln_1p()));
    } else {
        let p0 = params.p0;
        for (j, &dd) in d2.iter().enumerate() {
            let p = super::detection::half_normal(p0, sigma, dd);
            let lq = (-p).ln_1p();
            match caps.peek() {
                Some(t) if t.trap as usize == j => {
                    let y = t.hits as f64;
                    acc.add(xlogp(y, p.ln()) + xlogp(2.0 * kf - y, lq));
                    caps.next();
                }
                _ => acc.add(2.0 * kf * lq),
            }
        }
    }
    acc.total()
}

/// `u log(theta) + (1-u) log(1-theta)`.
#[inline]
pub fn sex_log_prob(theta: f64, male: bool) -> f64 {
    if male {
        theta.ln()
    } else {
        (-theta).ln_1p()
    }
}

/// Squared distances from `s` to every trap.
pub fn dist2_row(data: &CaptureDataset, s: &Point) -> Vec<f64> {
    let mut out = vec![0.0; data.j()];
    data.traps().dist2_row(s, &mut out);
    out
}

/// Log-likelihood contribution of true individual `i`, or `-inf` when the
/// latent state is inconsistent with the data.
pub fn individual_loglik(
    model: ModelId,
    data: &CaptureDataset,
    params: &ModelParams,
    latent: &LatentState,
    i: usize,
) -> f64 {
    let r = latent.l.preimage(i);
    let stats = PairStats::from_rows(&data.rows1()[i], &data.rows2()[r]);
    if !latent.z[i] {
        return if stats.is_empty() { 0.0 } else { f64::NEG_INFINITY };
    }
    individual_loglik_real(model, data, params, latent.u[i], &latent.s[i], i, r, &stats)
}

/// Contribution of a real individual with sex `male` and centre `s`, linked
/// to detector-2 row `r`.
#[allow(clippy::too_many_arguments)]
pub fn individual_loglik_real(
    model: ModelId,
    data: &CaptureDataset,
    params: &ModelParams,
    male: bool,
    s: &Point,
    i: usize,
    r: usize,
    stats: &PairStats,
) -> f64 {
    if !link_admissible(data, i, r, stats) {
        return f64::NEG_INFINITY;
    }
    let mut extra = 0.0;
    if model.has_sex() {
        match observed_sex(data, i, r) {
            SexEvidence::Conflict => return f64::NEG_INFINITY,
            SexEvidence::Known(v) if v != male => return f64::NEG_INFINITY,
            _ => {}
        }
        extra = sex_log_prob(params.theta, male);
    }
    let d2 = dist2_row(data, s);
    let sigma = params.sigma_for(model, male);
    detection_loglik(model, params, sigma, data.k(), &d2, stats) + extra
}

/// Per-individual log-likelihood terms, in true-index order.
pub fn per_individual_log_likelihoods(
    model: ModelId,
    data: &CaptureDataset,
    params: &ModelParams,
    latent: &LatentState,
) -> Vec<f64> {
    (0..data.m())
        .map(|i| individual_loglik(model, data, params, latent, i))
        .collect()
}

/// Checked single-individual variant.
pub fn per_individual_log_likelihood(
    model: ModelId,
    data: &CaptureDataset,
    params: &ModelParams,
    latent: &LatentState,
    i: usize,
) -> Result<f64> {
    check_shapes(data, latent)?;
    if i >= data.m() {
        return Err(Error::arg(format!("individual {i} beyond M = {}", data.m())));
    }
    Ok(individual_loglik(model, data, params, latent, i))
}

/// Total complete-data log-likelihood (sequential sum of the per-individual terms).
pub fn log_likelihood(
    model: ModelId,
    data: &CaptureDataset,
    params: &ModelParams,
    latent: &LatentState,
) -> Result<f64> {
    check_shapes(data, latent)?;
    let mut total = 0.0;
    for i in 0..data.m() {
        total += individual_loglik(model, data, params, latent, i);
    }
    Ok(total)
}

fn check_shapes(data: &CaptureDataset, latent: &LatentState) -> Result<()> {
    let m = data.m();
    if latent.z.len() != m || latent.u.len() != m || latent.s.len() != m || latent.l.len() != m {
        return Err(Error::invariant(format!(
            "latent state does not match augmentation bound M = {m}"
        )));
    }
    Ok(())
}
