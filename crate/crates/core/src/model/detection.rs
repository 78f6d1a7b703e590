//! Half-normal (Gaussian) encounter kernels.

use crate::error::{Error, Result};

fn check(base: f64, sigma: f64, d: f64, what: &str) -> Result<()> {
    if !(base > 0.0 && base < 1.0) {
        return Err(Error::arg(format!("{what} must lie in (0, 1), got {base}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::arg(format!("sigma must be positive, got {sigma}")));
    }
    if !(d >= 0.0) {
        return Err(Error::arg(format!("distance must be non-negative, got {d}")));
    }
    Ok(())
}

/// `base * exp(-d^2 / (2 sigma^2))` without argument checks.
#[inline]
pub fn half_normal(base: f64, sigma: f64, d2: f64) -> f64 {
    base * (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Log of [`half_normal`], exact in the far tail.
#[inline]
pub fn log_half_normal(log_base: f64, sigma: f64, d2: f64) -> f64 {
    log_base - d2 / (2.0 * sigma * sigma)
}

/// Probability that an individual enters the detection zone of a trap at
/// distance `d` from its activity centre on one occasion.
pub fn trap_entry_prob(omega0: f64, sigma: f64, d: f64) -> Result<f64> {
    check(omega0, sigma, d, "omega0")?;
    Ok(half_normal(omega0, sigma, d * d))
}

/// Per-detector, per-occasion detection probability at distance `d`.
pub fn detection_prob(p0: f64, sigma: f64, d: f64) -> Result<f64> {
    check(p0, sigma, d, "p0")?;
    Ok(half_normal(p0, sigma, d * d))
}
