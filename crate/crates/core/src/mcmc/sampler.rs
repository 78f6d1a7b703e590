use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::init::{fixed_sex, greedy_linkage, initial_centre};
use super::{Acceptance, Chain, Draw, McmcConfig};
use crate::error::{Error, Result};
use crate::model::likelihood::{
    detection_loglik, link_admissible, observed_sex, sex_log_prob, PairStats, SexEvidence,
};
use crate::model::{
    log_latent_prior, log_prior, CaptureDataset, LatentState, ModelId, ModelParams, Param,
    Permutation, Point, PriorSpec,
};
use crate::numeric::{logit, sigmoid};

const INIT_ATTEMPTS: usize = 20;

struct Sampler<'a> {
    model: ModelId,
    data: &'a CaptureDataset,
    prior: PriorSpec,
    cfg: &'a McmcConfig,
    rng: ChaCha8Rng,
    params: ModelParams,
    z: Vec<bool>,
    u: Vec<bool>,
    s: Vec<Point>,
    l: Permutation,
    /// Squared trap distances, M x J.
    d2: Vec<f64>,
    /// Pair statistics of (detector-1 row i, detector-2 row linked to i).
    stats: Vec<PairStats>,
    /// Detection log-likelihood of i as if it were real (constraints included).
    det: Vec<f64>,
    stale: Vec<bool>,
    /// Captured detector-2 rows that are not fully identified.
    partial2: Vec<usize>,
    acc: Acceptance,
    j: usize,
}

/// Runs the sampler and returns the post-burn-in draws.
pub fn fit(
    model: ModelId,
    data: &CaptureDataset,
    prior: &PriorSpec,
    config: &McmcConfig,
) -> Result<Chain> {
    config.validate()?;
    let m = data.m();
    if let Some(z) = &config.validation.fixed_z {
        if z.len() != m {
            return Err(Error::arg("fixed z has the wrong length"));
        }
    }
    // Models without sex ignore labels everywhere, initial linkage included.
    let unlabelled;
    let data = if !model.has_sex() && data.has_sex_labels() {
        unlabelled = data.without_sex();
        &unlabelled
    } else {
        data
    };
    let mut sampler = Sampler::new(model, data, *prior, config)?;
    let n_draws = config.n_draws();
    let mut chain = Chain {
        model,
        m,
        config: config.clone(),
        draws: Vec::with_capacity(n_draws),
        loglik: Vec::with_capacity(n_draws),
        log_prior: Vec::with_capacity(n_draws),
        log_latent_prior: Vec::with_capacity(n_draws),
        per_individual: Vec::with_capacity(n_draws * m),
        acceptance: Acceptance::default(),
    };
    for t in 0..config.n_iter {
        sampler.sweep();
        if t >= config.burn_in && (t - config.burn_in) % config.thin == 0 {
            sampler.record(&mut chain);
        }
    }
    chain.acceptance = sampler.acc;
    Ok(chain)
}

impl<'a> Sampler<'a> {
    fn new(
        model: ModelId,
        data: &'a CaptureDataset,
        prior: PriorSpec,
        cfg: &'a McmcConfig,
    ) -> Result<Self> {
        let m = data.m();
        let j = data.j();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = ModelParams::prior_means(model, &prior);
        let l = greedy_linkage(data)?;
        let nf = data.n_full();
        let partial2 = (nf..m).filter(|&r| !data.rows2()[r].is_empty()).collect();
        let stats: Vec<PairStats> = (0..m)
            .map(|i| PairStats::from_rows(&data.rows1()[i], &data.rows2()[l.preimage(i)]))
            .collect();
        let mut sampler = Sampler {
            model,
            data,
            prior,
            cfg,
            rng: rng.clone(),
            params,
            z: vec![false; m],
            u: vec![false; m],
            s: vec![Point::new(0.0, 0.0); m],
            l,
            d2: vec![0.0; m * j],
            stats,
            det: vec![0.0; m],
            stale: vec![true; m],
            partial2,
            acc: Acceptance::default(),
            j,
        };
        for _ in 0..INIT_ATTEMPTS {
            sampler.initialise_latent(&mut rng);
            if sampler.state_is_finite() {
                sampler.rng = rng;
                return Ok(sampler);
            }
        }
        Err(Error::Initialization {
            attempts: INIT_ATTEMPTS,
        })
    }

    fn initialise_latent(&mut self, rng: &mut ChaCha8Rng) {
        let m = self.data.m();
        let psi0 = self.params.psi;
        let theta0 = if self.model.has_sex() { self.params.theta } else { 0.5 };
        let grid = self.cfg.validation.s_grid.as_deref();
        for i in 0..m {
            let r = self.l.preimage(i);
            let captured = !self.stats[i].is_empty();
            self.z[i] = match &self.cfg.validation.fixed_z {
                Some(z) => z[i],
                None => captured || rng.random_bool(0.5 * psi0),
            };
            self.u[i] = fixed_sex(self.data, i, r).unwrap_or_else(|| rng.random_bool(theta0));
            self.s[i] = initial_centre(self.data, i, r, grid, rng);
            self.refresh_d2(i);
        }
        for i in 0..m {
            self.det[i] = self.det_for(i, self.u[i], &self.params);
            self.stale[i] = false;
        }
    }

    fn state_is_finite(&self) -> bool {
        (0..self.data.m()).all(|i| {
            if self.z[i] {
                self.det[i].is_finite()
            } else {
                self.flat() || self.stats[i].is_empty()
            }
        })
    }

    fn flat(&self) -> bool {
        self.cfg.validation.flat_likelihood
    }

    fn refresh_d2(&mut self, i: usize) {
        let j = self.j;
        self.data
            .traps()
            .dist2_row(&self.s[i], &mut self.d2[i * j..(i + 1) * j]);
    }

    /// Detection log-likelihood of index `i` with its current pair and
    /// centre, sex `male` and parameters `p`.
    fn det_for(&self, i: usize, male: bool, p: &ModelParams) -> f64 {
        let r = self.l.preimage(i);
        self.det_with(i, r, &self.stats[i], male, &self.d2[i * self.j..(i + 1) * self.j], p)
    }

    fn det_with(
        &self,
        i: usize,
        r: usize,
        stats: &PairStats,
        male: bool,
        d2: &[f64],
        p: &ModelParams,
    ) -> f64 {
        if self.flat() {
            return 0.0;
        }
        if !link_admissible(self.data, i, r, stats) {
            return f64::NEG_INFINITY;
        }
        if self.model.has_sex() {
            match observed_sex(self.data, i, r) {
                SexEvidence::Conflict => return f64::NEG_INFINITY,
                SexEvidence::Known(v) if v != male => return f64::NEG_INFINITY,
                _ => {}
            }
        }
        let sigma = p.sigma_for(self.model, male);
        detection_loglik(self.model, p, sigma, self.data.k(), d2, stats)
    }

    fn theta_term(&self, male: bool) -> f64 {
        if self.model.has_sex() {
            sex_log_prob(self.params.theta, male)
        } else {
            0.0
        }
    }

    fn fresh_det(&mut self, i: usize) -> f64 {
        if self.stale[i] {
            self.det[i] = self.det_for(i, self.u[i], &self.params);
            self.stale[i] = false;
        }
        self.det[i]
    }

    fn sweep(&mut self) {
        self.update_psi();
        if self.model.has_sex() {
            self.update_theta();
        }
        let model = self.model;
        for &p in model.active_params() {
            if !matches!(p, Param::Psi | Param::Theta) {
                self.update_scalar(p);
            }
        }
        self.update_z();
        if self.model.has_sex() {
            self.update_u();
        }
        self.update_s();
        self.update_l();
    }

    fn update_psi(&mut self) {
        let n = self.z.iter().filter(|&&z| z).count() as f64;
        let m = self.z.len() as f64;
        let beta = Beta::new(1.0 + n, 1.0 + m - n).expect("positive shape");
        self.params.psi = clamp_open(beta.sample(&mut self.rng));
    }

    fn update_theta(&mut self) {
        // Every index carries exactly one theta factor for its sex.
        let males = self.u.iter().filter(|&&u| u).count() as f64;
        let m = self.u.len() as f64;
        let beta = Beta::new(1.0 + males, 1.0 + m - males).expect("positive shape");
        self.params.theta = clamp_open(beta.sample(&mut self.rng));
    }

    fn affects(&self, p: Param, i: usize) -> bool {
        match p {
            Param::SigmaM => self.u[i],
            Param::SigmaF => !self.u[i],
            _ => true,
        }
    }

    fn update_scalar(&mut self, p: Param) {
        let upper = if p.is_length() { self.prior.r } else { 1.0 };
        let x = self.params.get(p) / upper;
        let step: f64 = self.rng.sample(StandardNormal);
        let x_new = sigmoid(logit(x) + self.cfg.scales.for_param(p) * step);
        if !(x_new > 0.0 && x_new < 1.0) {
            self.acc.record(p.name(), false);
            return;
        }
        let mut proposal = self.params;
        proposal.set(p, x_new * upper);
        let log_jac = x_new.ln() + (-x_new).ln_1p() - x.ln() - (-x).ln_1p();
        let mut delta = 0.0;
        let mut fresh = Vec::new();
        for i in 0..self.z.len() {
            if self.z[i] && self.affects(p, i) {
                let v = self.det_for(i, self.u[i], &proposal);
                delta += v - self.det[i];
                fresh.push((i, v));
            }
        }
        let accept = self.rng.random::<f64>().ln() < delta + log_jac;
        self.acc.record(p.name(), accept);
        if accept {
            self.params = proposal;
            for (i, v) in fresh {
                self.det[i] = v;
            }
            for i in 0..self.z.len() {
                if !self.z[i] && self.affects(p, i) {
                    self.stale[i] = true;
                }
            }
        }
    }

    fn update_z(&mut self) {
        if self.cfg.validation.fixed_z.is_some() {
            return;
        }
        let log_odds = self.params.psi.ln() - (-self.params.psi).ln_1p();
        for i in 0..self.z.len() {
            if !self.flat() && !self.stats[i].is_empty() {
                continue;
            }
            let det = self.fresh_det(i);
            self.z[i] = self.rng.random::<f64>() < sigmoid(log_odds + det);
        }
    }

    fn update_u(&mut self) {
        let theta = self.params.theta;
        for i in 0..self.u.len() {
            let r = self.l.preimage(i);
            if let Some(v) = fixed_sex(self.data, i, r) {
                if self.u[i] != v {
                    self.u[i] = v;
                    self.stale[i] = true;
                }
                continue;
            }
            let male = if self.z[i] {
                let cur = self.fresh_det(i);
                let other = self.det_for(i, !self.u[i], &self.params);
                let (dm, df) = if self.u[i] { (cur, other) } else { (other, cur) };
                let lo = theta.ln() + dm - (-theta).ln_1p() - df;
                let male = self.rng.random::<f64>() < sigmoid(lo);
                if male != self.u[i] {
                    self.det[i] = other;
                }
                male
            } else {
                let male = self.rng.random::<f64>() < theta;
                if male != self.u[i] {
                    self.stale[i] = true;
                }
                male
            };
            self.u[i] = male;
        }
    }

    fn update_s(&mut self) {
        let ss = *self.data.statespace();
        let tau = self.cfg.scales.s_walk;
        let mut row = vec![0.0; self.j];
        for i in 0..self.s.len() {
            let proposal = match &self.cfg.validation.s_grid {
                Some(g) => g[self.rng.random_range(0..g.len())],
                None => {
                    let dx: f64 = self.rng.sample(StandardNormal);
                    let dy: f64 = self.rng.sample(StandardNormal);
                    ss.reflect_into(Point::new(self.s[i].x + tau * dx, self.s[i].y + tau * dy))
                }
            };
            if !self.z[i] {
                self.s[i] = proposal;
                self.refresh_d2(i);
                self.stale[i] = true;
                continue;
            }
            self.data.traps().dist2_row(&proposal, &mut row);
            let r = self.l.preimage(i);
            let v = self.det_with(i, r, &self.stats[i], self.u[i], &row, &self.params);
            let accept = self.rng.random::<f64>().ln() < v - self.det[i];
            self.acc.record("s", accept);
            if accept {
                self.s[i] = proposal;
                self.d2[i * self.j..(i + 1) * self.j].copy_from_slice(&row);
                self.det[i] = v;
            }
        }
    }

    /// Contribution of index `i` (likelihood plus its sex factor) for a
    /// given pair, sex and detection value.
    fn index_term(&self, z: bool, stats: &PairStats, male: bool, det: f64) -> f64 {
        if z {
            det + self.theta_term(male)
        } else if self.flat() || stats.is_empty() {
            self.theta_term(male)
        } else {
            f64::NEG_INFINITY
        }
    }

    fn update_l(&mut self) {
        let m = self.z.len();
        let nf = self.data.n_full();
        if self.partial2.is_empty() || m - nf < 2 {
            return;
        }
        let proposals = self.cfg.l_block.unwrap_or(2 * m);
        for _ in 0..proposals {
            let r1 = self.partial2[self.rng.random_range(0..self.partial2.len())];
            let a = self.l.image(r1);
            let b = self.rng.random_range(nf..m);
            if a == b {
                continue;
            }
            let r2 = self.l.preimage(b);
            // After the swap, index a holds row r2 and index b holds row r1.
            let sa = PairStats::from_rows(&self.data.rows1()[a], &self.data.rows2()[r2]);
            let sb = PairStats::from_rows(&self.data.rows1()[b], &self.data.rows2()[r1]);
            let mut log_q = 0.0;
            let mut new_u = [self.u[a], self.u[b]];
            if self.model.has_sex() {
                let mut conflict = false;
                for (slot, (x, old_r, new_r)) in [(a, r1, r2), (b, r2, r1)].into_iter().enumerate() {
                    let before = observed_sex(self.data, x, old_r);
                    match observed_sex(self.data, x, new_r) {
                        SexEvidence::Conflict => conflict = true,
                        SexEvidence::Known(v) => {
                            new_u[slot] = v;
                            if before == SexEvidence::Unknown {
                                log_q -= std::f64::consts::LN_2;
                            }
                        }
                        SexEvidence::Unknown => {
                            if matches!(before, SexEvidence::Known(_)) {
                                new_u[slot] = self.rng.random_bool(0.5);
                                log_q += std::f64::consts::LN_2;
                            }
                        }
                    }
                }
                if conflict {
                    self.acc.record("l", false);
                    continue;
                }
            }
            let det_a = if self.z[a] {
                self.det_with(a, r2, &sa, new_u[0], &self.d2[a * self.j..(a + 1) * self.j], &self.params)
            } else {
                0.0
            };
            let det_b = if self.z[b] {
                self.det_with(b, r1, &sb, new_u[1], &self.d2[b * self.j..(b + 1) * self.j], &self.params)
            } else {
                0.0
            };
            let new = self.index_term(self.z[a], &sa, new_u[0], det_a)
                + self.index_term(self.z[b], &sb, new_u[1], det_b);
            let old = self.index_term(self.z[a], &self.stats[a], self.u[a], self.det_if_real(a))
                + self.index_term(self.z[b], &self.stats[b], self.u[b], self.det_if_real(b));
            let accept = new > f64::NEG_INFINITY
                && self.rng.random::<f64>().ln() < new - old + log_q;
            self.acc.record("l", accept);
            if accept {
                self.l.swap_rows(r1, r2);
                self.stats[a] = sa;
                self.stats[b] = sb;
                for (x, nu, det) in [(a, new_u[0], det_a), (b, new_u[1], det_b)] {
                    self.u[x] = nu;
                    if self.z[x] {
                        self.det[x] = det;
                        self.stale[x] = false;
                    } else {
                        self.stale[x] = true;
                    }
                }
                if !self.flat() {
                    // A swap can leave index a or b captured with z = 0 only
                    // if it was rejected above, so z needs no repair here.
                    debug_assert!(self.z[a] || self.stats[a].is_empty());
                }
            }
        }
    }

    fn det_if_real(&self, i: usize) -> f64 {
        if self.z[i] {
            self.det[i]
        } else {
            0.0
        }
    }

    fn record(&self, chain: &mut Chain) {
        let m = self.z.len();
        let params = self.params.restricted_to(self.model);
        let latent = LatentState {
            z: self.z.clone(),
            u: self.u.clone(),
            s: self.s.clone(),
            l: self.l.clone(),
        };
        let mut total = 0.0;
        for i in 0..m {
            let v = if self.z[i] {
                self.det[i] + self.theta_term(self.u[i])
            } else {
                0.0
            };
            total += v;
            chain.per_individual.push(v);
        }
        chain.loglik.push(total);
        chain.log_prior.push(log_prior(self.model, &params, &self.prior));
        chain
            .log_latent_prior
            .push(log_latent_prior(self.model, &latent, &params, self.data.statespace()));
        chain.draws.push(Draw { params, latent });
    }
}

fn clamp_open(v: f64) -> f64 {
    v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}
