//! Fractional calculus numerics.
//!
//! Everything here works with the Caputo derivative of order `0 < alpha <= 1`
//! and zero pre-history: the state at `t = 0` is an ordinary initial value and
//! nothing before it contributes to the memory integral.

mod convolution;
mod integral;
mod mittag_leffler;
mod solver;
mod weights;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use integral::fractional_integral;
pub use mittag_leffler::{mittag_leffler, mittag_leffler_with, SeriesOptions, MAX_ARGUMENT};
pub use solver::{integrate, solve_caputo_fde, AbmOptions, FdeSolution};
pub use weights::{
    abm_corrector_weight, abm_predictor_weight, abm_start_weight, gl_weights, MemoryKernel,
};

/// Gamma function; integer arguments are evaluated exactly as factorials.
pub(crate) fn gamma(x: f64) -> f64 {
    if x > 0.0 && x <= 171.0 && x.fract() == 0.0 {
        return (2..x as u64).fold(1.0, |acc, k| acc * k as f64);
    }
    libm::tgamma(x)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FracError {
    #[error("fractional order must satisfy 0 < alpha <= 1, got {0}")]
    InvalidOrder(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("argument {z} outside the supported series domain |z| <= {limit}")]
    OutOfDomain { z: f64, limit: f64 },
    #[error("series did not converge after {terms} terms (partial sum {partial_sum})")]
    NonConvergence { partial_sum: f64, terms: usize },
    #[error("non-finite state at step {step}")]
    Divergence { step: usize },
}

/// Order of the fractional derivative, restricted to `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    pub const ONE: FracOrder = FracOrder(1.0);

    pub fn new(alpha: f64) -> Result<Self, FracError> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(FracOrder(alpha))
        } else {
            Err(FracError::InvalidOrder(alpha))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// True for the integer-order reduction `alpha = 1`.
    #[inline]
    pub fn is_integer(self) -> bool {
        self.0 == 1.0
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = FracError;

    fn try_from(alpha: f64) -> Result<Self, Self::Error> {
        FracOrder::new(alpha)
    }
}

impl From<FracOrder> for f64 {
    fn from(order: FracOrder) -> f64 {
        order.0
    }
}

impl std::fmt::Display for FracOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
