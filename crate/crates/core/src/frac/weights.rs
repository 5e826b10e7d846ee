//! Convolution weights for discretized fractional operators.

use super::FracOrder;

/// Grünwald–Letnikov coefficients `w_k = (-1)^k C(alpha, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryKernel {
    pub weights: Vec<f64>,
    pub order: FracOrder,
    /// Grid spacing the kernel is meant for; the discrete operator is
    /// `step^-alpha * sum_k w_k x_{n-k}`.
    pub step: f64,
}

impl MemoryKernel {
    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    /// `step^-alpha`, the factor in front of the weighted sum.
    pub fn scale(&self) -> f64 {
        self.step.powf(-self.order.value())
    }
}

/// First `count` Grünwald–Letnikov weights (unit step).
pub fn gl_weights(order: FracOrder, count: usize) -> MemoryKernel {
    let alpha = order.value();
    let mut weights = Vec::with_capacity(count);
    if count > 0 {
        weights.push(1.0);
    }
    for k in 1..count {
        let prev = weights[k - 1];
        weights.push(prev * (1.0 - (alpha + 1.0) / k as f64));
    }
    MemoryKernel {
        weights,
        order,
        step: 1.0,
    }
}

/// Predictor (rectangle rule) weight for lag `k >= 0`: `(k+1)^a - k^a`.
pub fn abm_predictor_weight(order: FracOrder, k: usize) -> f64 {
    let a = order.value();
    if k == 0 {
        return 1.0;
    }
    let kf = k as f64;
    kf.powf(a) * (a * (1.0 / kf).ln_1p()).exp_m1()
}

/// Corrector (product trapezoid) weight for interior lag `k >= 1`:
/// `(k+1)^p - 2 k^p + (k-1)^p` with `p = alpha + 1`.
///
/// Evaluated as `k^p * g(1/k)` with the even binomial series of
/// `g(u) = (1+u)^p + (1-u)^p - 2` once `k` is large enough that direct
/// evaluation would cancel.
pub fn abm_corrector_weight(order: FracOrder, k: usize) -> f64 {
    assert!(k >= 1, "corrector weight defined for k >= 1");
    let p = order.value() + 1.0;
    let kf = k as f64;
    if k < 4 {
        return (kf + 1.0).powf(p) - 2.0 * kf.powf(p) + (kf - 1.0).powf(p);
    }
    let u = 1.0 / kf;
    let u2 = u * u;
    let mut coeff = 1.0; // C(p, n)
    let mut upow = 1.0;
    let mut sum = 0.0;
    let mut n = 1usize;
    loop {
        coeff *= (p - (n - 1) as f64) / n as f64;
        if n.is_multiple_of(2) {
            upow *= u2;
            let t = coeff * upow;
            sum += t;
            if t.abs() <= 1e-18 * sum.abs() || coeff == 0.0 {
                break;
            }
        }
        n += 1;
        if n > 200 {
            break;
        }
    }
    kf.powf(p) * 2.0 * sum
}

/// Corrector weight attached to the initial sample when the target index is
/// `m >= 1`: `(m-1)^p - (m-1-alpha) m^alpha`.
pub fn abm_start_weight(order: FracOrder, m: usize) -> f64 {
    assert!(m >= 1, "start weight defined for m >= 1");
    let a = order.value();
    let n = (m - 1) as f64;
    if m < 5 {
        return n.powf(a + 1.0) - (n - a) * (n + 1.0).powf(a);
    }
    let e = (a * (1.0 / n).ln_1p()).exp_m1();
    n.powf(a) * (a * (1.0 + e) - n * e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ord(a: f64) -> FracOrder {
        FracOrder::new(a).unwrap()
    }

    #[test]
    fn integer_order_difference() {
        assert_eq!(gl_weights(FracOrder::ONE, 3).weights, vec![1.0, -1.0, 0.0]);
        let w = gl_weights(FracOrder::ONE, 6).weights;
        assert!(w[2..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn half_order_first_weights() {
        assert_eq!(gl_weights(ord(0.5), 2).weights, vec![1.0, -0.5]);
    }

    #[test]
    fn scale_uses_step() {
        let k = gl_weights(ord(0.5), 1).with_step(0.25);
        assert!((k.scale() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn abm_weights_match_direct_formula() {
        for &a in &[0.2, 0.5, 0.8, 1.0] {
            let o = ord(a);
            let p = a + 1.0;
            for k in 1..60usize {
                let kf = k as f64;
                let direct_b = (kf + 1.0).powf(a) - kf.powf(a);
                assert!(
                    (abm_predictor_weight(o, k) - direct_b).abs() < 1e-12 * direct_b.abs().max(1.0)
                );
                let direct_a = (kf + 1.0).powf(p) - 2.0 * kf.powf(p) + (kf - 1.0).powf(p);
                assert!(
                    (abm_corrector_weight(o, k) - direct_a).abs() < 1e-11,
                    "a={a} k={k}"
                );
                let m = k;
                let n = (m - 1) as f64;
                let direct_s = n.powf(p) - (n - a) * (n + 1.0).powf(a);
                assert!(
                    (abm_start_weight(o, m) - direct_s).abs() < 1e-10,
                    "a={a} m={m}"
                );
            }
        }
    }

    #[test]
    fn integer_order_abm_weights_are_trapezoid() {
        let o = FracOrder::ONE;
        for k in 1..1000 {
            assert!((abm_corrector_weight(o, k) - 2.0).abs() < 1e-12);
            assert!((abm_predictor_weight(o, k) - 1.0).abs() < 1e-12);
            assert!((abm_start_weight(o, k) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn large_lag_corrector_weight_is_accurate() {
        // second difference of k^p ~ p (p-1) k^(p-2) for large k
        let a = 0.5;
        let k = 1_000_000usize;
        let w = abm_corrector_weight(ord(a), k);
        let p = a + 1.0;
        let kf = k as f64;
        let leading = p * (p - 1.0) * kf.powf(p - 2.0);
        let next = p * (p - 1.0) * (p - 2.0) * (p - 3.0) / 12.0 * kf.powf(p - 4.0);
        assert!(((w - leading - next) / leading).abs() < 1e-12);
    }
}
