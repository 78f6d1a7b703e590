//! Data generation under the arrival/detection model with sex-specific
//! movement, and the survey designs used by the study.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::detection::half_normal;
use crate::model::{
    CaptureDataset, DatasetParts, Detector, LatentState, ModelParams, Permutation, Point,
    StateSpace, TrapGrid,
};

/// One row of the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: u32,
    pub m: usize,
    pub n: usize,
    pub n_male: usize,
    pub omega0: f64,
    pub phi: f64,
    pub sigma_m: f64,
    pub sigma_f: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_male > self.n || self.n > self.m {
            return Err(Error::arg(format!(
                "scenario {}: need N_male <= N <= M, got {} / {} / {}",
                self.id, self.n_male, self.n, self.m
            )));
        }
        if !(self.omega0 > 0.0 && self.omega0 <= 1.0) || !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::arg(format!("scenario {}: probabilities out of range", self.id)));
        }
        if !(self.sigma_m > 0.0 && self.sigma_f > 0.0) {
            return Err(Error::arg(format!("scenario {}: movement scales must be positive", self.id)));
        }
        Ok(())
    }

    /// Generating parameter block (model M1) with psi = N/M and theta = N_male/N.
    pub fn true_params(&self) -> ModelParams {
        ModelParams {
            psi: self.n as f64 / self.m as f64,
            theta: if self.n == 0 { f64::NAN } else { self.n_male as f64 / self.n as f64 },
            phi: self.phi,
            omega0: self.omega0,
            p0: self.omega0 * self.phi,
            sigma: if self.n == 0 {
                f64::NAN
            } else {
                (self.n_male as f64 * self.sigma_m + (self.n - self.n_male) as f64 * self.sigma_f)
                    / self.n as f64
            },
            sigma_m: self.sigma_m,
            sigma_f: self.sigma_f,
        }
    }
}

/// The twelve full-scale scenarios (M = 400, N = 100, 40 males).
pub fn scenario_table() -> Vec<Scenario> {
    const ROWS: [(f64, f64, f64, f64); 12] = [
        (0.01, 0.3, 0.3, 0.15),
        (0.01, 0.9, 0.3, 0.15),
        (0.01, 0.3, 0.4, 0.2),
        (0.01, 0.9, 0.4, 0.2),
        (0.03, 0.8, 0.3, 0.15),
        (0.03, 0.8, 0.4, 0.2),
        (0.05, 0.3, 0.3, 0.15),
        (0.05, 0.5, 0.3, 0.15),
        (0.05, 0.9, 0.3, 0.15),
        (0.05, 0.3, 0.4, 0.2),
        (0.05, 0.5, 0.4, 0.2),
        (0.05, 0.9, 0.4, 0.2),
    ];
    ROWS.iter()
        .enumerate()
        .map(|(idx, &(omega0, phi, sigma_m, sigma_f))| Scenario {
            id: idx as u32 + 1,
            m: 400,
            n: 100,
            n_male: 40,
            omega0,
            phi,
            sigma_m,
            sigma_f,
        })
        .collect()
}

/// Desk-scale analogs: id 1 is low information, id 2 high information.
pub fn scaled_scenarios() -> Vec<Scenario> {
    [(1, 0.01, 0.3), (2, 0.05, 0.9)]
        .into_iter()
        .map(|(id, omega0, phi)| Scenario {
            id,
            m: 80,
            n: 20,
            n_male: 8,
            omega0,
            phi,
            sigma_m: 0.3,
            sigma_f: 0.15,
        })
        .collect()
}

/// State space, trap array and number of occasions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyDesign {
    pub statespace: StateSpace,
    pub traps: TrapGrid,
    pub k: usize,
    pub buffer: f64,
}

impl SurveyDesign {
    /// Regular `nx` x `ny` trap array at the cell centres of the interior
    /// left after removing `buffer` on every side.
    pub fn regular(
        statespace: StateSpace,
        buffer: f64,
        nx: usize,
        ny: usize,
        k: usize,
    ) -> Result<Self> {
        statespace.validate()?;
        if k == 0 {
            return Err(Error::arg("number of occasions K must be positive"));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::arg("trap array must have at least one row and column"));
        }
        let (w, h) = (statespace.width() - 2.0 * buffer, statespace.height() - 2.0 * buffer);
        if !(buffer >= 0.0 && w > 0.0 && h > 0.0) {
            return Err(Error::arg("buffer leaves no interior for traps"));
        }
        let (dx, dy) = (w / nx as f64, h / ny as f64);
        let mut locations = Vec::with_capacity(nx * ny);
        for a in 0..nx {
            for b in 0..ny {
                locations.push(Point::new(
                    statespace.x_min + buffer + dx * (a as f64 + 0.5),
                    statespace.y_min + buffer + dy * (b as f64 + 0.5),
                ));
            }
        }
        let traps = TrapGrid::new(locations, &statespace)?;
        Ok(SurveyDesign {
            statespace,
            traps,
            k,
            buffer,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.statespace.validate()?;
        if self.k == 0 {
            return Err(Error::arg("number of occasions K must be positive"));
        }
        Ok(())
    }
}

/// 5 x 7 state space, unit buffer, 10 x 16 traps (spacing 0.3 by 0.3125), K = 50.
pub fn standard_design() -> SurveyDesign {
    let ss = StateSpace::new((0.0, 5.0), (0.0, 7.0), 0.25).expect("valid state space");
    SurveyDesign::regular(ss, 1.0, 10, 16, 50).expect("valid design")
}

/// 2.5 x 3.5 state space, buffer 0.5, 4 x 6 traps, K = 10.
pub fn scaled_design() -> SurveyDesign {
    let ss = StateSpace::new((0.0, 2.5), (0.0, 3.5), 0.125).expect("valid state space");
    SurveyDesign::regular(ss, 0.5, 4, 6, 10).expect("valid design")
}

/// Which captured rows carry a sex label in simulated data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SexReveal {
    #[default]
    AllCaptured,
    FullyIdentifiedOnly,
    None,
}

/// Ground truth kept apart from the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub scenario: Scenario,
    pub seed: u64,
    pub params: ModelParams,
    pub n: usize,
    pub n_male: usize,
    /// True latent state in the dataset's indexing: real individuals first
    /// by detector-1 row, then detector-2-only, then uncaptured, then phantoms.
    pub latent: LatentState,
}

/// Simulates one survey under the arrival/detection model with sex-specific
/// movement. Deterministic in `seed`.
pub fn simulate_dataset(
    scenario: &Scenario,
    design: &SurveyDesign,
    seed: u64,
    reveal: SexReveal,
) -> Result<(CaptureDataset, TruthRecord)> {
    scenario.validate()?;
    design.validate()?;
    let ss = design.statespace;
    let (n, m, k) = (scenario.n, scenario.m, design.k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let centres: Vec<Point> = (0..n)
        .map(|_| {
            Point::new(
                rng.random_range(ss.x_min..ss.x_max),
                rng.random_range(ss.y_min..ss.y_max),
            )
        })
        .collect();
    let male: Vec<bool> = (0..n).map(|i| i < scenario.n_male).collect();

    // Sorted (trap, occasion) cells per individual and detector.
    let mut hits1: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut hits2: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut full = vec![false; n];
    for i in 0..n {
        let sigma = if male[i] { scenario.sigma_m } else { scenario.sigma_f };
        for (j, x) in design.traps.locations().iter().enumerate() {
            let eta = half_normal(scenario.omega0, sigma, centres[i].dist2(x));
            for kk in 0..k {
                if rng.random::<f64>() < eta {
                    let a = rng.random::<f64>() < scenario.phi;
                    let b = rng.random::<f64>() < scenario.phi;
                    if a {
                        hits1[i].push((j, kk));
                    }
                    if b {
                        hits2[i].push((j, kk));
                    }
                    full[i] |= a && b;
                }
            }
        }
    }

    let fulls: Vec<usize> = (0..n).filter(|&i| full[i]).collect();
    let part1: Vec<usize> = (0..n).filter(|&i| !full[i] && !hits1[i].is_empty()).collect();
    let mut part2: Vec<usize> = (0..n).filter(|&i| !full[i] && !hits2[i].is_empty()).collect();
    part2.shuffle(&mut rng);
    let n_full = fulls.len();
    let rows1: Vec<usize> = fulls.iter().chain(&part1).copied().collect();
    let rows2: Vec<usize> = fulls.iter().chain(&part2).copied().collect();
    if rows1.len() > m || rows2.len() > m {
        return Err(Error::arg("augmentation bound M smaller than the number of captured rows"));
    }

    // True index of every real individual.
    let mut true_index = vec![usize::MAX; n];
    for (row, &i) in rows1.iter().enumerate() {
        true_index[i] = row;
    }
    let mut next = rows1.len();
    for &i in &part2 {
        if true_index[i] == usize::MAX {
            true_index[i] = next;
            next += 1;
        }
    }
    for t in true_index.iter_mut() {
        if *t == usize::MAX {
            *t = next;
            next += 1;
        }
    }

    let mut captures = Vec::new();
    for (row, &i) in rows1.iter().enumerate() {
        captures.extend(hits1[i].iter().map(|&(j, kk)| (row, j, kk, Detector::One)));
    }
    for (row, &i) in rows2.iter().enumerate() {
        captures.extend(hits2[i].iter().map(|&(j, kk)| (row, j, kk, Detector::Two)));
    }
    let mut sex = Vec::new();
    let shown = |row: usize| match reveal {
        SexReveal::AllCaptured => true,
        SexReveal::FullyIdentifiedOnly => row < n_full,
        SexReveal::None => false,
    };
    for (det, rows) in [(Detector::One, &rows1), (Detector::Two, &rows2)] {
        for (row, &i) in rows.iter().enumerate() {
            if shown(row) {
                sex.push((det, row, male[i]));
            }
        }
    }
    let data = CaptureDataset::new(DatasetParts {
        m,
        k,
        n_full,
        traps: design.traps.clone(),
        statespace: ss,
        captures,
        sex,
    })?;

    // Linkage: captured detector-2 rows map to their individual's true
    // index; empty rows take the leftover indices in increasing order.
    let mut l = vec![u32::MAX; m];
    let mut used = vec![false; m];
    for (row, &i) in rows2.iter().enumerate() {
        l[row] = true_index[i] as u32;
        used[true_index[i]] = true;
    }
    let mut free = (0..m).filter(|&t| !used[t]);
    for slot in l.iter_mut().filter(|v| **v == u32::MAX) {
        *slot = free.next().expect("counts match") as u32;
    }
    let mut z = vec![false; m];
    let mut u = vec![false; m];
    let mut s: Vec<Point> = (0..m)
        .map(|_| {
            Point::new(
                rng.random_range(ss.x_min..ss.x_max),
                rng.random_range(ss.y_min..ss.y_max),
            )
        })
        .collect();
    for i in 0..n {
        let t = true_index[i];
        z[t] = true;
        u[t] = male[i];
        s[t] = centres[i];
    }
    let truth = TruthRecord {
        scenario: *scenario,
        seed,
        params: scenario.true_params(),
        n,
        n_male: scenario.n_male,
        latent: LatentState {
            z,
            u,
            s,
            l: Permutation::from_vec(l)?,
        },
    };
    Ok((data, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_latent_is_consistent_with_data() {
        let design = scaled_design();
        let sc = scaled_scenarios()[1];
        let (data, truth) = simulate_dataset(&sc, &design, 3, SexReveal::AllCaptured).unwrap();
        truth.latent.validate(data.statespace()).unwrap();
        assert_eq!(truth.latent.n_real(), sc.n);
        assert_eq!(truth.latent.n_male(), sc.n_male);
        for model in crate::model::ModelId::ALL {
            let ll = crate::model::log_likelihood(model, &data, &truth.params, &truth.latent).unwrap();
            assert!(ll.is_finite(), "{model}");
        }
    }
}
