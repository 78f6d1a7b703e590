//! Independent reference implementations used by the integration tests.
//!
//! Everything here works from the dense capture arrays cell by cell and
//! shares no code with the library's sparse likelihood path.
#![allow(dead_code)]

pub mod toy;

use rand::Rng;
use secr_core::numeric::log_sum_exp;
use secr_core::{
    CaptureDataset, LatentState, ModelId, ModelParams, Permutation, Point, StateSpace, TrapGrid,
};

/// Generative log-probability of one (detector 1, detector 2) cell outcome.
pub fn cell_logprob(model: ModelId, base: f64, sigma: f64, phi: f64, d2: f64, a: u8, b: u8) -> f64 {
    let kernel = base * (-d2 / (2.0 * sigma * sigma)).exp();
    if model.uses_arrival() {
        if a + b == 0 {
            let none = 1.0 - kernel + kernel * (1.0 - phi) * (1.0 - phi);
            none.max(1e-300).ln()
        } else {
            let mut lp = kernel.ln();
            for v in [a, b] {
                lp += if v == 1 { phi.ln() } else { (1.0 - phi).ln() };
            }
            lp
        }
    } else {
        let mut lp = 0.0;
        for v in [a, b] {
            lp += if v == 1 { kernel.ln() } else { (1.0 - kernel).ln() };
        }
        lp
    }
}

/// Term-by-term complete-data log-likelihood of true individual `i`.
pub fn oracle_individual(
    model: ModelId,
    data: &CaptureDataset,
    params: &ModelParams,
    latent: &LatentState,
    i: usize,
) -> f64 {
    let (j_n, k_n) = (data.j(), data.k());
    let r = latent.l.preimage(i);
    let row1 = |j: usize, k: usize| data.y1()[(i * j_n + j) * k_n + k];
    let row2 = |j: usize, k: usize| data.y2()[(r * j_n + j) * k_n + k];
    let mut captured = false;
    let mut shared = false;
    for j in 0..j_n {
        for k in 0..k_n {
            captured |= row1(j, k) + row2(j, k) > 0;
            shared |= row1(j, k) + row2(j, k) == 2;
        }
    }
    if !latent.z[i] {
        return if captured { f64::NEG_INFINITY } else { 0.0 };
    }
    let nf = data.n_full();
    let linked_ok = if i < nf || r < nf { i == r } else { !shared };
    if !linked_ok {
        return f64::NEG_INFINITY;
    }
    let male = latent.u[i];
    let mut total = 0.0;
    if model.has_sex() {
        for label in [data.sex1()[i], data.sex2()[r]].into_iter().flatten() {
            if label != male {
                return f64::NEG_INFINITY;
            }
        }
        total += if male { params.theta.ln() } else { (1.0 - params.theta).ln() };
    }
    let sigma = match (model.has_sex(), male) {
        (false, _) => params.sigma,
        (true, true) => params.sigma_m,
        (true, false) => params.sigma_f,
    };
    let base = if model.uses_arrival() { params.omega0 } else { params.p0 };
    let s = latent.s[i];
    for (j, x) in data.traps().locations().iter().enumerate() {
        let d2 = (s.x - x.x).powi(2) + (s.y - x.y).powi(2);
        for k in 0..k_n {
            total += cell_logprob(model, base, sigma, params.phi, d2, row1(j, k), row2(j, k));
        }
    }
    total
}

pub fn oracle_loglik(
    model: ModelId,
    data: &CaptureDataset,
    params: &ModelParams,
    latent: &LatentState,
) -> f64 {
    (0..data.m()).map(|i| oracle_individual(model, data, params, latent, i)).sum()
}

/// Close-enough comparison that treats matching infinities as equal.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// A small random dataset with a consistent fully identified prefix.
pub struct Micro {
    pub data: CaptureDataset,
    pub params: ModelParams,
    pub latent: LatentState,
}

/// Random parameter block with every field set (so any model can use it).
pub fn random_params<R: Rng>(rng: &mut R, r_max: f64) -> ModelParams {
    let mut p = ModelParams::default();
    p.psi = rng.random_range(0.05..0.95);
    p.theta = rng.random_range(0.05..0.95);
    p.phi = rng.random_range(0.05..0.95);
    p.omega0 = rng.random_range(0.05..0.95);
    p.p0 = rng.random_range(0.05..0.95);
    p.sigma = rng.random_range(0.1..r_max);
    p.sigma_m = rng.random_range(0.1..r_max);
    p.sigma_f = rng.random_range(0.1..r_max);
    p
}

pub fn random_micro<R: Rng>(rng: &mut R, max_m: usize, max_j: usize, max_k: usize) -> Micro {
    let m = rng.random_range(1..=max_m);
    let j = rng.random_range(1..=max_j);
    let k = rng.random_range(1..=max_k);
    let ss = StateSpace::new((0.0, 2.0), (0.0, 2.0), 0.5).unwrap();
    let traps: Vec<Point> = (0..j)
        .map(|_| Point::new(rng.random_range(0.2..1.8), rng.random_range(0.2..1.8)))
        .collect();
    let traps = TrapGrid::new(traps, &ss).unwrap();
    let density = rng.random_range(0.1..0.6);
    let mut y1: Vec<u8> = (0..m * j * k).map(|_| rng.random_bool(density) as u8).collect();
    let mut y2: Vec<u8> = (0..m * j * k).map(|_| rng.random_bool(density) as u8).collect();
    // Leave some rows empty so the z = 0 branch is exercised.
    for i in 0..m {
        if rng.random_bool(0.3) {
            y1[i * j * k..(i + 1) * j * k].fill(0);
            y2[i * j * k..(i + 1) * j * k].fill(0);
        }
    }
    let shares = |i: usize, y1: &[u8], y2: &[u8]| {
        (0..j * k).any(|c| y1[i * j * k + c] == 1 && y2[i * j * k + c] == 1)
    };
    let n_full = (0..m).take_while(|&i| shares(i, &y1, &y2)).count();
    let n_full = rng.random_range(0..=n_full);
    let label = |y: &[u8], i: usize, rng: &mut R| {
        let any = y[i * j * k..(i + 1) * j * k].iter().any(|&v| v == 1);
        (any && rng.random_bool(0.5)).then(|| rng.random_bool(0.5))
    };
    let mut sex1 = Vec::with_capacity(m);
    let mut sex2 = Vec::with_capacity(m);
    for i in 0..m {
        sex1.push(label(&y1, i, rng));
        sex2.push(label(&y2, i, rng));
        if i < n_full {
            if let (Some(a), Some(_)) = (sex1[i], sex2[i]) {
                sex2[i] = Some(a);
            }
        }
    }
    let data =
        CaptureDataset::from_arrays(m, k, n_full, traps, ss, y1, y2, sex1, sex2).unwrap();
    let params = random_params(rng, 2.0);
    let latent = random_latent(rng, &data);
    Micro { data, params, latent }
}

/// Random latent state; about half the time it is made admissible.
pub fn random_latent<R: Rng>(rng: &mut R, data: &CaptureDataset) -> LatentState {
    let m = data.m();
    let ss = data.statespace();
    let mut l: Vec<u32> = (0..m as u32).collect();
    for a in (1..m).rev() {
        l.swap(a, rng.random_range(0..=a));
    }
    let admissible = rng.random_bool(0.5);
    if admissible {
        l = (0..m as u32).collect();
    }
    let l = Permutation::from_vec(l).unwrap();
    let z = (0..m)
        .map(|i| {
            let r = l.preimage(i);
            let captured = !data.rows1()[i].is_empty() || !data.rows2()[r].is_empty();
            (admissible && captured) || rng.random_bool(0.6)
        })
        .collect();
    let u = (0..m)
        .map(|i| {
            let r = l.preimage(i);
            match (admissible, data.sex1()[i].or(data.sex2()[r])) {
                (true, Some(v)) => v,
                _ => rng.random_bool(0.5),
            }
        })
        .collect();
    let s = (0..m)
        .map(|_| {
            Point::new(
                rng.random_range(ss.x_min..ss.x_max),
                rng.random_range(ss.y_min..ss.y_max),
            )
        })
        .collect();
    LatentState { z, u, s, l }
}

/// Brute-force integrated likelihood: sums the complete-data likelihood
/// over every joint (z, u, cell) configuration.
pub fn enumerated_il(model: ModelId, data: &CaptureDataset, p: &ModelParams, l: &Permutation, grid: &[Point]) -> f64 {
    let m = data.m();
    let g_n = grid.len();
    let sexes: &[bool] = if model.has_sex() { &[true, false] } else { &[false] };
    let per = 2 * sexes.len() * g_n;
    let mut terms = Vec::new();
    let mut code = vec![0usize; m];
    loop {
        let mut z = Vec::with_capacity(m);
        let mut u = Vec::with_capacity(m);
        let mut s = Vec::with_capacity(m);
        let mut w = 0.0;
        for &c in &code {
            let real = c % 2 == 1;
            let male = sexes[(c / 2) % sexes.len()];
            let cell = grid[c / (2 * sexes.len())];
            w += if real { p.psi.ln() } else { (1.0 - p.psi).ln() };
            if !real && model.has_sex() {
                w += if male { p.theta.ln() } else { (1.0 - p.theta).ln() };
            }
            w -= (g_n as f64).ln();
            z.push(real);
            u.push(male);
            s.push(cell);
        }
        let latent = LatentState { z, u, s, l: l.clone() };
        terms.push(w + oracle_loglik(model, data, p, &latent));
        let mut pos = 0;
        loop {
            if pos == m {
                return log_sum_exp(&terms);
            }
            code[pos] += 1;
            if code[pos] < per {
                break;
            }
            code[pos] = 0;
            pos += 1;
        }
    }
}
