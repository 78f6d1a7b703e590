//! Small numerical helpers shared across modules: stable log-sum-exp,
//! compensated summation, logit transforms and batch-means standard errors.

/// `log(sum(exp(x)))` over the finite-or-`-inf` values in `xs`.
///
/// Returns `-inf` for an empty slice or when every value is `-inf`. The inner
/// sum is compensated so the result does not depend on the order of `xs`
/// beyond rounding of the final logarithm.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut acc = NeumaierSum::default();
    for &x in xs {
        acc.add((x - max).exp());
    }
    max + acc.total().ln()
}

/// `log(mean(exp(x)))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NEG_INFINITY;
    }
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Neumaier (improved Kahan) compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if !t.is_finite() {
            self.sum = t;
            self.comp = 0.0;
            return;
        }
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        if !self.sum.is_finite() {
            return self.sum;
        }
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn stable_sum(xs: &[f64]) -> f64 {
    let mut acc = NeumaierSum::default();
    xs.iter().for_each(|&x| acc.add(x));
    acc.total()
}

pub fn mean(xs: &[f64]) -> f64 {
    stable_sum(xs) / xs.len() as f64
}

/// Population variance (1/n normalisation).
pub fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut acc = NeumaierSum::default();
    for &x in xs {
        acc.add((x - m) * (x - m));
    }
    acc.total() / xs.len() as f64
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `n * log_p`, treating `0 * -inf` as zero (an empty product).
#[inline]
pub fn xlogp(n: f64, log_p: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n * log_p
    }
}

/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 30;

/// Batch-means standard error of the mean of `xs`.
///
/// Uses up to [`BATCHES`] contiguous batches of equal size; trailing values
/// that do not fill a batch are dropped from the error estimate only.
pub fn batch_means_se(xs: &[f64]) -> f64 {
    let batches = BATCHES.min(xs.len());
    if batches < 2 {
        return 0.0;
    }
    let size = xs.len() / batches;
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(batches)
        .map(|c| mean(c))
        .collect();
    let m = mean(&means);
    let var = means.iter().map(|b| (b - m) * (b - m)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// Mixes two 64-bit values into a well-distributed seed (splitmix64 finaliser).
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
