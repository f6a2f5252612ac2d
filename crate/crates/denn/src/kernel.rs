//! Temporal kernels.
//!
//! A kernel `κ` maps the arrival time of a presynaptic spike to its impact
//! on the postsynaptic firing time. Any strictly decreasing, strictly
//! positive function works; the exponential `κ(x) = e^(-x)` is the default
//! because it weighs each spike exponentially more than later ones.
//!
//! The inverse kernel `κ(x) = 1/x` is only positive and decreasing on the
//! positive axis, so its input is shifted right and clipped below before
//! evaluation. Inside the clipped region the kernel is flat, and its
//! subgradient is taken to be zero.
//!
//! Silent neurons carry a spike time of `+∞`; both kernels map that to an
//! impact of exactly zero, so silence contributes nothing downstream.

use serde::{Deserialize, Serialize};

/// Default right-shift applied to the inverse kernel's input.
pub const INVERSE_SHIFT: f64 = 3.0;
/// Default lower clip for the inverse kernel's shifted input.
pub const INVERSE_FLOOR: f64 = 1e-3;

/// Choice of temporal kernel `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `κ(x) = e^(-x)`, defined on all of ℝ.
    Exponential,
    /// `κ(x) = 1 / max(x + shift, floor)`.
    Inverse { shift: f64, floor: f64 },
}

impl KernelSpec {
    /// Inverse kernel with the standard shift of three units and a clip
    /// at one thousandth.
    pub fn inverse() -> Self {
        KernelSpec::Inverse {
            shift: INVERSE_SHIFT,
            floor: INVERSE_FLOOR,
        }
    }

    /// Evaluate `κ(x)`. Returns exactly 0 for `x = +∞`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            // exp(-inf) is 0, which is the limit we want for silence.
            KernelSpec::Exponential => (-x).exp(),
            KernelSpec::Inverse { shift, floor } => {
                if x == f64::INFINITY {
                    0.0
                } else {
                    1.0 / (x + shift).max(floor)
                }
            }
        }
    }

    /// Evaluate `κ'(x)`. Zero for `x = +∞` and inside the inverse
    /// kernel's clipped region.
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            KernelSpec::Exponential => -(-x).exp(),
            KernelSpec::Inverse { shift, floor } => {
                if x == f64::INFINITY {
                    return 0.0;
                }
                let shifted = x + shift;
                if shifted <= floor {
                    0.0
                } else {
                    -1.0 / (shifted * shifted)
                }
            }
        }
    }

    /// Distance from `x` to the nearest non-smooth point of the kernel
    /// (the clip boundary for the inverse kernel). Used by gradient
    /// checks to stay away from subgradient switches; the exponential
    /// kernel is smooth everywhere.
    pub fn smoothness_margin(&self, x: f64) -> f64 {
        match *self {
            KernelSpec::Exponential => f64::INFINITY,
            KernelSpec::Inverse { shift, floor } => {
                if x == f64::INFINITY {
                    f64::INFINITY
                } else {
                    (x + shift - floor).abs()
                }
            }
        }
    }
}
