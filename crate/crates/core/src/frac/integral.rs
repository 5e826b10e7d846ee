use super::weights::{abm_corrector_weight, abm_start_weight};
use super::{gamma, FracError, FracOrder};

/// Riemann–Liouville integral of order `alpha` over `[0, t_end]` from uniform
/// samples `f(0), f(step), ..., f(t_end)`.
///
/// Product trapezoid rule: `f` is interpolated piecewise linearly and the
/// weakly singular kernel `(t_end - s)^(alpha-1)` is integrated exactly, so
/// the rule is exact for linear integrands.
pub fn fractional_integral(samples: &[f64], order: FracOrder, step: f64) -> Result<f64, FracError> {
    if samples.is_empty() {
        return Err(FracError::InvalidArgument("sample list is empty".into()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(FracError::InvalidArgument(format!(
            "step must be positive, got {step}"
        )));
    }
    let n = samples.len() - 1;
    if n == 0 {
        return Ok(0.0);
    }
    let a = order.value();
    let mut sum = abm_start_weight(order, n) * samples[0] + samples[n];
    for (j, &f) in samples.iter().enumerate().take(n).skip(1) {
        sum += abm_corrector_weight(order, n - j) * f;
    }
    Ok(step.powf(a) / gamma(a + 2.0) * sum)
}
