use super::{gamma, FracError};

/// Largest `|z|` accepted by the series evaluation.
pub const MAX_ARGUMENT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    /// Absolute size below which a decreasing term ends the summation.
    pub tolerance: f64,
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            tolerance: 1e-12,
            max_terms: 500,
        }
    }
}

/// Two-parameter Mittag-Leffler function `E_{alpha,beta}(z)` for real `z`,
/// summed from its power series with default options.
pub fn mittag_leffler(alpha: f64, beta: f64, z: f64) -> Result<f64, FracError> {
    mittag_leffler_with(alpha, beta, z, SeriesOptions::default())
}

/// Series evaluation of `sum_k z^k / Gamma(alpha k + beta)`.
///
/// The partial sum is carried as an unevaluated pair (`hi + lo`) updated with
/// error-free transformations, so accumulation adds no rounding beyond the
/// terms themselves. For large negative `z` the terms grow before they decay
/// and the result can lose up to `eps * max|term|` absolute accuracy.
pub fn mittag_leffler_with(
    alpha: f64,
    beta: f64,
    z: f64,
    options: SeriesOptions,
) -> Result<f64, FracError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(FracError::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(FracError::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if !z.is_finite() {
        return Err(FracError::InvalidArgument(format!(
            "argument must be finite, got {z}"
        )));
    }
    if z.abs() > MAX_ARGUMENT {
        return Err(FracError::OutOfDomain {
            z,
            limit: MAX_ARGUMENT,
        });
    }

    let mut acc = CompensatedSum::default();
    let mut prev = f64::INFINITY;
    for k in 0..options.max_terms {
        let t = term(alpha, beta, z, k);
        if !t.is_finite() {
            return Err(FracError::NonConvergence {
                partial_sum: acc.value(),
                terms: k,
            });
        }
        acc.add(t);
        let mag = t.abs();
        if mag < options.tolerance && mag <= prev {
            return Ok(acc.value());
        }
        prev = mag;
    }
    Err(FracError::NonConvergence {
        partial_sum: acc.value(),
        terms: options.max_terms,
    })
}

fn term(alpha: f64, beta: f64, z: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0 / gamma(beta);
    }
    if z == 0.0 {
        return 0.0;
    }
    let arg = alpha * k as f64 + beta;
    let zk = z.powi(k as i32);
    if arg < 170.0 && zk.is_finite() && zk.abs() > f64::MIN_POSITIVE {
        return zk / gamma(arg);
    }
    let sign = if z < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
    sign * (k as f64 * z.abs().ln() - libm::lgamma(arg)).exp()
}

#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    hi: f64,
    lo: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        self.hi = s;
        self.lo += err;
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}
