//! Posterior summaries kept per fit, and their aggregation over replicates.

use serde::{Deserialize, Serialize};

use crate::mcmc::Chain;
use crate::numeric::NeumaierSum;

/// Label used for the population size N = sum z.
pub const N_LABEL: &str = "N";

/// Scalar series tracked for a chain: its active parameters, then N.
pub fn tracked_series(chain: &Chain) -> Vec<(String, Vec<f64>)> {
    let mut out: Vec<(String, Vec<f64>)> = chain
        .model
        .active_params()
        .iter()
        .map(|&p| (p.name().to_string(), chain.series(p)))
        .collect();
    out.push((N_LABEL.to_string(), chain.population_series()));
    out
}

/// Mean squared error of draws against a true value.
pub fn mse(draws: &[f64], truth: f64) -> f64 {
    let mut acc = NeumaierSum::default();
    for &d in draws {
        acc.add((d - truth) * (d - truth));
    }
    acc.total() / draws.len() as f64
}

/// Pearson correlations; rows and columns of zero-variance (or too short)
/// series are `None`.
pub fn correlation_matrix(series: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let k = series.len();
    let centred: Vec<Option<(Vec<f64>, f64)>> = series
        .iter()
        .map(|s| {
            if s.len() < 2 {
                return None;
            }
            let mean = crate::numeric::mean(s);
            let c: Vec<f64> = s.iter().map(|v| v - mean).collect();
            let ss: f64 = c.iter().map(|v| v * v).sum();
            (ss > 0.0).then_some((c, ss.sqrt()))
        })
        .collect();
    let mut out = vec![vec![None; k]; k];
    for a in 0..k {
        for b in a..k {
            let (Some((ca, na)), Some((cb, nb))) = (&centred[a], &centred[b]) else { continue };
            let r = if a == b {
                1.0
            } else {
                let dot: f64 = ca.iter().zip(cb).map(|(x, y)| x * y).sum();
                (dot / (na * nb)).clamp(-1.0, 1.0)
            };
            out[a][b] = Some(r);
            out[b][a] = Some(r);
        }
    }
    out
}

/// Correlations of the tracked series of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl Correlations {
    pub fn of_chain(chain: &Chain) -> Self {
        let tracked = tracked_series(chain);
        let names = tracked.iter().map(|t| t.0.clone()).collect();
        let series: Vec<Vec<f64>> = tracked.into_iter().map(|t| t.1).collect();
        Correlations {
            names,
            values: correlation_matrix(&series),
        }
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let ia = self.names.iter().position(|n| n == a)?;
        let ib = self.names.iter().position(|n| n == b)?;
        self.values[ia][ib]
    }
}

/// Square root of the mean of per-replicate MSEs; `None` without any.
pub fn average_rmse_of(mses: &[f64]) -> Option<f64> {
    if mses.is_empty() {
        return None;
    }
    Some(crate::numeric::mean(mses).sqrt())
}
