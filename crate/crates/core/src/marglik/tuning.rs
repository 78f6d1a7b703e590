//! Tuning densities for the Gelfand-Dey estimator, fitted to posterior
//! draws on the unconstrained scale.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Family of a tuning density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TuningKind {
    /// The prior itself; turns the estimator into the harmonic mean.
    Prior,
    Normal,
    StudentT { df: u32 },
    /// Normal restricted to its central `alpha` ellipsoid.
    TruncatedNormal { alpha: f64 },
}

impl TuningKind {
    /// The nine densities evaluated for every approximation.
    pub const STUDY: [TuningKind; 9] = [
        TuningKind::Normal,
        TuningKind::StudentT { df: 10 },
        TuningKind::StudentT { df: 100 },
        TuningKind::StudentT { df: 500 },
        TuningKind::StudentT { df: 1000 },
        TuningKind::StudentT { df: 10000 },
        TuningKind::TruncatedNormal { alpha: 0.90 },
        TuningKind::TruncatedNormal { alpha: 0.95 },
        TuningKind::TruncatedNormal { alpha: 0.99 },
    ];

    pub fn label(&self) -> String {
        match self {
            TuningKind::Prior => "prior".into(),
            TuningKind::Normal => "normal".into(),
            TuningKind::StudentT { df } => format!("t{df}"),
            TuningKind::TruncatedNormal { alpha } => format!("tn{alpha:.2}"),
        }
    }
}

impl fmt::Display for TuningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for TuningKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::arg(format!("unknown tuning density `{s}`"));
        match s {
            "prior" => Ok(TuningKind::Prior),
            "normal" => Ok(TuningKind::Normal),
            _ => {
                if let Some(df) = s.strip_prefix("tn") {
                    let alpha: f64 = df.parse().map_err(|_| bad())?;
                    if !(alpha > 0.0 && alpha < 1.0) {
                        return Err(bad());
                    }
                    Ok(TuningKind::TruncatedNormal { alpha })
                } else if let Some(df) = s.strip_prefix('t') {
                    let df: u32 = df.parse().map_err(|_| bad())?;
                    if df == 0 {
                        return Err(bad());
                    }
                    Ok(TuningKind::StudentT { df })
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// A fitted tuning density.
#[derive(Debug, Clone)]
pub struct TuningDensity {
    pub kind: TuningKind,
    pub location: DVector<f64>,
    /// Lower Cholesky factor of the scale matrix.
    chol: DMatrix<f64>,
    log_det: f64,
    /// Squared Mahalanobis radius of the truncation ellipsoid.
    radius2: f64,
    /// Ridge added to the covariance diagonal, zero when none was needed.
    pub ridge: f64,
}

impl TuningDensity {
    pub fn dim(&self) -> usize {
        self.location.len()
    }

    /// The prior stand-in: evaluation is delegated to the caller's prior.
    pub fn prior(dim: usize) -> Self {
        TuningDensity {
            kind: TuningKind::Prior,
            location: DVector::zeros(dim),
            chol: DMatrix::identity(dim, dim),
            log_det: 0.0,
            radius2: f64::INFINITY,
            ridge: 0.0,
        }
    }

    /// Builds a density from an explicit location and scale matrix.
    pub fn new(kind: TuningKind, location: Vec<f64>, scale: DMatrix<f64>) -> Result<Self> {
        let d = location.len();
        if scale.nrows() != d || scale.ncols() != d {
            return Err(Error::arg("scale matrix does not match the location"));
        }
        if kind == TuningKind::Prior {
            return Ok(TuningDensity::prior(d));
        }
        let (chol, ridge) = regularised_cholesky(&scale)?;
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let radius2 = match kind {
            TuningKind::TruncatedNormal { alpha } => ChiSquared::new(d as f64)
                .map_err(|e| Error::arg(e.to_string()))?
                .inverse_cdf(alpha),
            _ => f64::INFINITY,
        };
        Ok(TuningDensity {
            kind,
            location: DVector::from_vec(location),
            chol,
            log_det,
            radius2,
            ridge,
        })
    }

    /// Squared Mahalanobis distance from the location.
    pub fn mahalanobis2(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.location;
        let w = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor is non-singular");
        w.norm_squared()
    }

    /// Log density at `x`. Not meaningful for [`TuningKind::Prior`].
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        let q = self.mahalanobis2(x);
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        match self.kind {
            TuningKind::Prior => f64::NAN,
            TuningKind::Normal => -0.5 * (d * ln2pi + self.log_det + q),
            TuningKind::StudentT { df } => {
                let nu = df as f64;
                ln_gamma((nu + d) / 2.0)
                    - ln_gamma(nu / 2.0)
                    - 0.5 * d * (nu * std::f64::consts::PI).ln()
                    - 0.5 * self.log_det
                    - 0.5 * (nu + d) * (q / nu).ln_1p()
            }
            TuningKind::TruncatedNormal { alpha } => {
                if q <= self.radius2 {
                    -0.5 * (d * ln2pi + self.log_det + q) - alpha.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Cholesky factor whose pivots are not negligible next to the diagonal.
fn well_conditioned(m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let top = m.diagonal().max();
    let l = m.cholesky()?.l();
    let smallest = l.diagonal().min();
    (smallest * smallest > 1e-12 * top).then_some(l)
}

fn regularised_cholesky(scale: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(l) = well_conditioned(scale.clone()) {
        return Ok((l, 0.0));
    }
    let d = scale.nrows();
    let mean_diag = (scale.trace() / d as f64).abs().max(1e-12);
    let mut ridge = 1e-10 * mean_diag;
    for _ in 0..40 {
        let shifted = scale + DMatrix::identity(d, d) * ridge;
        if let Some(l) = well_conditioned(shifted) {
            log::warn!("tuning covariance is singular; added ridge {ridge:e}");
            return Ok((l, ridge));
        }
        ridge *= 10.0;
    }
    Err(Error::invariant("tuning covariance could not be regularised"))
}

/// Fits `kind` to draws given as rows: location = sample mean, scale =
/// sample covariance.
pub fn fit_tuning(draws: &[Vec<f64>], kind: TuningKind) -> Result<TuningDensity> {
    let d = draws.first().map(Vec::len).unwrap_or(0);
    if kind == TuningKind::Prior {
        return Ok(TuningDensity::prior(d));
    }
    if d == 0 || draws.len() < d + 2 {
        return Err(Error::arg(format!(
            "need at least {} draws to fit a {d}-dimensional tuning density, got {}",
            d + 2,
            draws.len()
        )));
    }
    let n = draws.len() as f64;
    let mut mean = vec![0.0; d];
    for x in draws {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for x in draws {
        for a in 0..d {
            let da = x[a] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += da * (x[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            let v = cov[(a, b)] / (n - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    TuningDensity::new(kind, mean, cov)
}
