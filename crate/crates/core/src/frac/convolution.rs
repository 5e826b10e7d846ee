//! Exact causal history convolution for product-integration schemes.
//!
//! A step of the predictor-corrector needs `y[m] = sum_{j<m} K(m-j) f[j]`
//! for two kernels, where `f[j]` only becomes known once step `j` is done.
//! The index range is split recursively in halves: the left half is finished
//! first, then its whole contribution to the right half is added with one
//! FFT product, then the right half is processed. Small blocks are summed
//! directly. Every history term is kept; the cost is `O(N log^2 N)` instead
//! of `O(N^2)`.

use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Kernel pair indexed by lag; entry 0 is unused.
pub(crate) struct KernelPair {
    pub predictor: Vec<f64>,
    pub corrector: Vec<f64>,
}

struct BlockPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectra: [Vec<Complex<f64>>; 2],
}

pub(crate) struct BlockConvolver {
    planner: FftPlanner<f64>,
    plans: HashMap<usize, BlockPlan>,
    buf: Vec<Complex<f64>>,
    tmp: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl BlockConvolver {
    pub fn new() -> Self {
        BlockConvolver {
            planner: FftPlanner::new(),
            plans: HashMap::new(),
            buf: Vec::new(),
            tmp: Vec::new(),
            scratch: Vec::new(),
        }
    }

    fn plan(&mut self, kernels: &KernelPair, size: usize) -> &BlockPlan {
        let planner = &mut self.planner;
        self.plans.entry(size).or_insert_with(|| {
            let n = 2 * size;
            let forward = planner.plan_fft_forward(n);
            let inverse = planner.plan_fft_inverse(n);
            let spectrum = |k: &[f64]| {
                let mut v = vec![Complex::new(0.0, 0.0); n];
                // lags 1..size-1 can connect the two halves of a block
                for (q, slot) in v.iter_mut().enumerate().take(size - 1) {
                    *slot = Complex::new(k.get(q + 1).copied().unwrap_or(0.0), 0.0);
                }
                forward.process(&mut v);
                v
            };
            let spectra = [spectrum(&kernels.predictor), spectrum(&kernels.corrector)];
            BlockPlan {
                forward,
                inverse,
                spectra,
            }
        })
    }

    /// Adds the contribution of `f[lo..mid]` to `y[m]` for `m` in `mid..end`,
    /// where the block is `[lo, hi)` with `mid = (lo + hi) / 2` and
    /// `end <= hi`. `f` and both outputs are component-major.
    #[allow(clippy::too_many_arguments)]
    pub fn accumulate(
        &mut self,
        kernels: &KernelPair,
        f: &[Vec<f64>],
        y_pred: &mut [Vec<f64>],
        y_corr: &mut [Vec<f64>],
        lo: usize,
        hi: usize,
        end: usize,
    ) {
        let size = hi - lo;
        let mid = lo + size / 2;
        let half = mid - lo;
        if end <= mid {
            return;
        }
        let n = 2 * size;
        self.plan(kernels, size);
        let plan = &self.plans[&size];
        let scratch_len = plan
            .forward
            .get_inplace_scratch_len()
            .max(plan.inverse.get_inplace_scratch_len());
        self.buf.resize(n, Complex::new(0.0, 0.0));
        self.tmp.resize(n, Complex::new(0.0, 0.0));
        self.scratch.resize(scratch_len, Complex::new(0.0, 0.0));
        let norm = 1.0 / n as f64;
        let dim = f.len();

        let mut c = 0;
        while c < dim {
            // two real components share one complex transform
            let pair = c + 1 < dim;
            for (s, slot) in self.buf.iter_mut().enumerate() {
                *slot = if s < half {
                    let im = if pair { f[c + 1][lo + s] } else { 0.0 };
                    Complex::new(f[c][lo + s], im)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            plan.forward
                .process_with_scratch(&mut self.buf, &mut self.scratch);
            for (which, spectrum) in plan.spectra.iter().enumerate() {
                for ((t, b), k) in self.tmp.iter_mut().zip(&self.buf).zip(spectrum) {
                    *t = b * k;
                }
                plan.inverse
                    .process_with_scratch(&mut self.tmp, &mut self.scratch);
                let y = if which == 0 {
                    &mut *y_pred
                } else {
                    &mut *y_corr
                };
                for m in mid..end {
                    let v = self.tmp[half - 1 + (m - mid)] * norm;
                    y[c][m] += v.re;
                    if pair {
                        y[c + 1][m] += v.im;
                    }
                }
            }
            c += 2;
        }
    }
}

/// Adds `sum_{j in [lo, m)} K(m-j) f[j]` to both outputs at index `m`.
pub(crate) fn accumulate_direct(
    kernels: &KernelPair,
    f: &[Vec<f64>],
    y_pred: &mut [Vec<f64>],
    y_corr: &mut [Vec<f64>],
    lo: usize,
    m: usize,
) {
    for c in 0..f.len() {
        let mut sp = 0.0;
        let mut sc = 0.0;
        for j in lo..m {
            sp += kernels.predictor[m - j] * f[c][j];
            sc += kernels.corrector[m - j] * f[c][j];
        }
        y_pred[c][m] += sp;
        y_corr[c][m] += sc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(k: &[f64], f: &[f64], m: usize) -> f64 {
        (0..m).map(|j| k[m - j] * f[j]).sum()
    }

    #[test]
    fn recursive_split_matches_brute_force() {
        let len = 256;
        let kernels = KernelPair {
            predictor: (0..=len).map(|l| 1.0 / (1.0 + l as f64).sqrt()).collect(),
            corrector: (0..=len).map(|l| (0.3 * l as f64).cos()).collect(),
        };
        let f: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                (0..len)
                    .map(|j| ((j * (c + 2)) as f64 * 0.37).sin())
                    .collect()
            })
            .collect();
        let mut yp = vec![vec![0.0; len]; 3];
        let mut yc = vec![vec![0.0; len]; 3];
        let mut conv = BlockConvolver::new();

        fn rec(
            conv: &mut BlockConvolver,
            k: &KernelPair,
            f: &[Vec<f64>],
            yp: &mut [Vec<f64>],
            yc: &mut [Vec<f64>],
            lo: usize,
            hi: usize,
        ) {
            if hi - lo <= 8 {
                for m in lo..hi {
                    accumulate_direct(k, f, yp, yc, lo, m);
                }
                return;
            }
            let mid = (lo + hi) / 2;
            rec(conv, k, f, yp, yc, lo, mid);
            conv.accumulate(k, f, yp, yc, lo, hi, hi);
            rec(conv, k, f, yp, yc, mid, hi);
        }
        rec(&mut conv, &kernels, &f, &mut yp, &mut yc, 0, len);

        for c in 0..3 {
            for m in 0..len {
                assert!((yp[c][m] - brute(&kernels.predictor, &f[c], m)).abs() < 1e-11);
                assert!((yc[c][m] - brute(&kernels.corrector, &f[c], m)).abs() < 1e-11);
            }
        }
    }
}
