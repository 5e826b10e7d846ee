//! Adams–Bashforth–Moulton predictor-corrector for Caputo systems
//! `D^alpha x = f(x)`, `x(0) = x0`.
//!
//! With `h` the step and `p = alpha + 1`:
//!
//! ```text
//! predictor  xP_m = x0 + h^a/Gamma(a+1) * sum_{j<m} b_{m-1-j} f_j
//! corrector  x_m  = x0 + h^a/Gamma(a+2) * (f(xP_m) + c_m f_0 + sum_{0<j<m} a_{m-j} f_j)
//! ```
//!
//! For `alpha = 1` this collapses to Heun's method written over the whole
//! history (trapezoid rule from `t = 0`).

use super::convolution::{accumulate_direct, BlockConvolver, KernelPair};
use super::weights::{abm_corrector_weight, abm_predictor_weight, abm_start_weight};
use super::{gamma, FracError, FracOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbmOptions {
    /// Keep only the last `n` history samples. Changes the model; off by default.
    pub memory_window: Option<usize>,
    /// Block length below which history sums are formed directly.
    pub direct_block: usize,
}

impl Default for AbmOptions {
    fn default() -> Self {
        AbmOptions {
            memory_window: None,
            direct_block: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdeSolution {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub order: FracOrder,
}

/// Solves `D^alpha x = field(x)` on `steps` uniform steps and returns every
/// state, including `x0` at `t = 0`.
pub fn solve_caputo_fde<F>(
    mut field: F,
    x0: &[f64],
    order: FracOrder,
    step: f64,
    steps: usize,
) -> Result<FdeSolution, FracError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    integrate(
        |x: &[f64], out: &mut [f64]| {
            field(x, out);
            Ok::<(), FracError>(())
        },
        x0,
        order,
        step,
        steps,
        &AbmOptions::default(),
        |m, x| {
            times.push(m as f64 * step);
            values.push(x.to_vec());
            Ok(())
        },
    )?;
    Ok(FdeSolution {
        times,
        values,
        order,
    })
}

/// Streaming form of the solver. `field` may fail with the caller's error
/// type; `observer` sees every accepted state in order (index 0 is `x0`) and
/// may abort the run by returning an error.
pub fn integrate<E, F, O>(
    field: F,
    x0: &[f64],
    order: FracOrder,
    step: f64,
    steps: usize,
    options: &AbmOptions,
    observer: O,
) -> Result<(), E>
where
    E: From<FracError>,
    F: FnMut(&[f64], &mut [f64]) -> Result<(), E>,
    O: FnMut(usize, &[f64]) -> Result<(), E>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(
            FracError::InvalidArgument(format!("step must be positive, got {step}")).into(),
        );
    }
    if x0.is_empty() {
        return Err(FracError::InvalidArgument("empty initial state".into()).into());
    }
    if options.memory_window == Some(0) {
        return Err(FracError::InvalidArgument("memory window must be positive".into()).into());
    }
    let mut run = Run::new(field, observer, x0, order, step, steps, options);
    run.start()?;
    match options.memory_window {
        None => {
            let total = run.padded_len(options.direct_block.max(2));
            let mut conv = BlockConvolver::new();
            run.process(&mut conv, 0, total, options.direct_block.max(2))?;
        }
        Some(window) => run.process_windowed(window)?,
    }
    Ok(())
}

struct Run<'a, F, O> {
    field: F,
    observer: O,
    x0: &'a [f64],
    order: FracOrder,
    steps: usize,
    window: Option<usize>,
    kernels: KernelPair,
    pred_scale: f64,
    corr_scale: f64,
    f: Vec<Vec<f64>>,
    y_pred: Vec<Vec<f64>>,
    y_corr: Vec<Vec<f64>>,
    xp: Vec<f64>,
    fp: Vec<f64>,
    x: Vec<f64>,
    fx: Vec<f64>,
}

impl<'a, E, F, O> Run<'a, F, O>
where
    E: From<FracError>,
    F: FnMut(&[f64], &mut [f64]) -> Result<(), E>,
    O: FnMut(usize, &[f64]) -> Result<(), E>,
{
    fn new(
        field: F,
        observer: O,
        x0: &'a [f64],
        order: FracOrder,
        step: f64,
        steps: usize,
        options: &AbmOptions,
    ) -> Self {
        let dim = x0.len();
        let a = order.value();
        let lags = match options.memory_window {
            Some(w) => w.min(steps),
            None => steps,
        };
        let kernels = KernelPair {
            predictor: (0..=lags + 1)
                .map(|l| {
                    if l == 0 {
                        0.0
                    } else {
                        abm_predictor_weight(order, l - 1)
                    }
                })
                .collect(),
            corrector: (0..=lags + 1)
                .map(|l| {
                    if l == 0 {
                        0.0
                    } else {
                        abm_corrector_weight(order, l)
                    }
                })
                .collect(),
        };
        let ha = step.powf(a);
        Run {
            field,
            observer,
            x0,
            order,
            steps,
            window: options.memory_window,
            kernels,
            pred_scale: ha / gamma(a + 1.0),
            corr_scale: ha / gamma(a + 2.0),
            f: vec![vec![0.0; steps + 1]; dim],
            y_pred: vec![vec![0.0; steps + 1]; dim],
            y_corr: vec![vec![0.0; steps + 1]; dim],
            xp: vec![0.0; dim],
            fp: vec![0.0; dim],
            x: vec![0.0; dim],
            fx: vec![0.0; dim],
        }
    }

    fn padded_len(&self, block: usize) -> usize {
        let mut len = block;
        while len < self.steps + 1 {
            len *= 2;
        }
        len
    }

    fn start(&mut self) -> Result<(), E> {
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(FracError::Divergence { step: 0 }.into());
        }
        (self.field)(self.x0, &mut self.fx)?;
        if self.fx.iter().any(|v| !v.is_finite()) {
            return Err(FracError::Divergence { step: 0 }.into());
        }
        for (c, v) in self.fx.iter().enumerate() {
            self.f[c][0] = *v;
        }
        (self.observer)(0, self.x0)
    }

    fn process(
        &mut self,
        conv: &mut BlockConvolver,
        lo: usize,
        hi: usize,
        block: usize,
    ) -> Result<(), E> {
        if lo > self.steps {
            return Ok(());
        }
        if hi - lo <= block {
            for m in lo..hi.min(self.steps + 1) {
                accumulate_direct(
                    &self.kernels,
                    &self.f,
                    &mut self.y_pred,
                    &mut self.y_corr,
                    lo,
                    m,
                );
                if m > 0 {
                    self.advance(m)?;
                }
            }
            return Ok(());
        }
        let mid = (lo + hi) / 2;
        self.process(conv, lo, mid, block)?;
        let end = hi.min(self.steps + 1);
        conv.accumulate(
            &self.kernels,
            &self.f,
            &mut self.y_pred,
            &mut self.y_corr,
            lo,
            hi,
            end,
        );
        self.process(conv, mid, hi, block)
    }

    fn process_windowed(&mut self, window: usize) -> Result<(), E> {
        for m in 1..=self.steps {
            let lo = m.saturating_sub(window);
            accumulate_direct(
                &self.kernels,
                &self.f,
                &mut self.y_pred,
                &mut self.y_corr,
                lo,
                m,
            );
            self.advance(m)?;
        }
        Ok(())
    }

    /// Completes step `m` once both history sums hold every `j < m` term.
    fn advance(&mut self, m: usize) -> Result<(), E> {
        let dim = self.x.len();
        for c in 0..dim {
            self.xp[c] = self.x0[c] + self.pred_scale * self.y_pred[c][m];
        }
        if self.xp.iter().any(|v| !v.is_finite()) {
            return Err(FracError::Divergence { step: m }.into());
        }
        (self.field)(&self.xp, &mut self.fp)?;

        // history sums include f_0 with the interior weight; swap in the
        // start weight when f_0 is still inside the retained history
        let f0_weight = if self.window.is_none_or(|w| m <= w) {
            abm_start_weight(self.order, m) - self.kernels.corrector[m]
        } else {
            0.0
        };
        for c in 0..dim {
            let hist = self.y_corr[c][m] + f0_weight * self.f[c][0];
            self.x[c] = self.x0[c] + self.corr_scale * (self.fp[c] + hist);
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(FracError::Divergence { step: m }.into());
        }
        (self.field)(&self.x, &mut self.fx)?;
        if self.fx.iter().any(|v| !v.is_finite()) {
            return Err(FracError::Divergence { step: m }.into());
        }
        for c in 0..dim {
            self.f[c][m] = self.fx[c];
        }
        (self.observer)(m, &self.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_keeps_initial_state() {
        let sol = solve_caputo_fde(
            |_, out| out.fill(0.0),
            &[3.0],
            FracOrder::new(0.4).unwrap(),
            0.01,
            200,
        )
        .unwrap();
        assert_eq!(sol.values.len(), 201);
        assert!(sol.values.iter().all(|v| v[0] == 3.0));
    }

    #[test]
    fn integer_order_decay() {
        let h = 1e-3;
        let sol =
            solve_caputo_fde(|x, out| out[0] = -x[0], &[1.0], FracOrder::ONE, h, 1000).unwrap();
        let last = sol.values.last().unwrap()[0];
        assert!((last - (-1.0f64).exp()).abs() < 1e-4);
        assert!((sol.times[1000] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn times_are_uniform() {
        let sol = solve_caputo_fde(
            |x, out| out[0] = -x[0],
            &[1.0],
            FracOrder::new(0.5).unwrap(),
            0.1,
            10,
        )
        .unwrap();
        for w in sol.times.windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn blocked_and_direct_history_agree() {
        let order = FracOrder::new(0.6).unwrap();
        let field = |x: &[f64], out: &mut [f64]| {
            out[0] = -x[0] + 0.5 * x[1].sin();
            out[1] = -0.3 * x[1] + 0.1 * x[0] * x[0];
            out[2] = -x[2];
        };
        let run = |opts: AbmOptions| {
            let mut states = Vec::new();
            integrate(
                |x: &[f64], out: &mut [f64]| {
                    field(x, out);
                    Ok::<(), FracError>(())
                },
                &[1.0, -0.5, 2.0],
                order,
                0.01,
                777,
                &opts,
                |_, x| {
                    states.push(x.to_vec());
                    Ok(())
                },
            )
            .unwrap();
            states
        };
        let fft = run(AbmOptions {
            memory_window: None,
            direct_block: 8,
        });
        let direct = run(AbmOptions {
            memory_window: Some(10_000),
            direct_block: 8,
        });
        assert_eq!(fft.len(), direct.len());
        for (a, b) in fft.iter().zip(&direct) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn short_window_changes_long_run() {
        let order = FracOrder::new(0.5).unwrap();
        let run = |w: Option<usize>| {
            let mut last = 0.0;
            integrate(
                |x: &[f64], out: &mut [f64]| {
                    out[0] = -x[0];
                    Ok::<(), FracError>(())
                },
                &[1.0],
                order,
                0.01,
                500,
                &AbmOptions {
                    memory_window: w,
                    direct_block: 64,
                },
                |_, x| {
                    last = x[0];
                    Ok(())
                },
            )
            .unwrap();
            last
        };
        assert!((run(None) - run(Some(20))).abs() > 1e-3);
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let err = solve_caputo_fde(
            |x, out| out[0] = x[0] * x[0],
            &[1e200],
            FracOrder::ONE,
            0.1,
            10,
        )
        .unwrap_err();
        assert_eq!(err, FracError::Divergence { step: 0 });
    }

    #[test]
    fn observer_error_aborts() {
        #[derive(Debug)]
        enum E {
            Frac,
            Stop(usize),
        }
        impl From<FracError> for E {
            fn from(_: FracError) -> Self {
                E::Frac
            }
        }
        let r = integrate(
            |x: &[f64], out: &mut [f64]| {
                out[0] = -x[0];
                Ok::<(), E>(())
            },
            &[1.0],
            FracOrder::ONE,
            0.1,
            100,
            &AbmOptions::default(),
            |m, _| if m == 7 { Err(E::Stop(m)) } else { Ok(()) },
        );
        assert!(matches!(r, Err(E::Stop(7))));
    }
}
