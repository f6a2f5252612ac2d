//! Synaptic delays and the activity they induce on spike times.
//!
//! The learnable parameter of every synapse is a *signed delay* `d^s ∈ ℝ`.
//! The effective delay is a Gaussian of the signed value,
//!
//! ```text
//! d = exp(-(d^s / σ)²) ∈ (0, 1]
//! ```
//!
//! so delays stay positive under unconstrained gradient descent. `σ` is a
//! per-neuron width learned alongside the delays. A synapse with `d^s = 0`
//! has delay exactly 1 and, thanks to the correction term below, transmits
//! exactly nothing.
//!
//! The impact of presynaptic time `z` on the postsynaptic sum is
//!
//! ```text
//! a = sign(d^s) · [κ(z + d) - κ(z + 1)]
//! ```
//!
//! The `-κ(z + 1)` term removes the jump that `sign` would otherwise cause
//! at `d = 1`: both one-sided limits of `a` as `d^s → 0` are zero, so the
//! activity is continuous in the parameter. Negative signed delays excite
//! (the postsynaptic sum decreases, the neuron fires earlier), positive
//! ones inhibit.
//!
//! All three partial derivatives are closed-form; [`activity_partials`]
//! returns them exactly, and the test suite holds them against central
//! finite differences.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{DennError, Result};
use crate::kernel::KernelSpec;

/// sign with `sign(0) := 0`, which makes zero signed delays transmit
/// exactly nothing.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Map a signed delay to its effective delay `exp(-(d^s/σ)²) ∈ (0, 1]`.
#[inline]
pub fn delay_from_signed(d_signed: f64, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let r = d_signed / sigma;
    (-(r * r)).exp()
}

/// Checked variant used at API boundaries.
pub fn try_delay_from_signed(d_signed: f64, sigma: f64) -> Result<f64> {
    if sigma <= 0.0 || sigma.is_nan() {
        return Err(DennError::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(delay_from_signed(d_signed, sigma))
}

/// Synaptic activity `sign(d^s)·[κ(z + d) - κ(z + 1)]`.
///
/// Returns exactly 0 when the presynaptic neuron is silent (`z = +∞`) or
/// the signed delay is zero.
#[inline]
pub fn synaptic_activity(z_pre: f64, d_signed: f64, sigma: f64, kernel: KernelSpec) -> f64 {
    if z_pre == f64::INFINITY || d_signed == 0.0 {
        return 0.0;
    }
    let d = delay_from_signed(d_signed, sigma);
    sign(d_signed) * (kernel.eval(z_pre + d) - kernel.eval(z_pre + 1.0))
}

/// The three exact partial derivatives of [`synaptic_activity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityPartials {
    /// ∂a/∂d^s
    pub d_signed: f64,
    /// ∂a/∂σ
    pub sigma: f64,
    /// ∂a/∂z
    pub z_pre: f64,
}

impl ActivityPartials {
    pub const ZERO: Self = ActivityPartials {
        d_signed: 0.0,
        sigma: 0.0,
        z_pre: 0.0,
    };
}

/// Exact partials of the synaptic activity with respect to the signed
/// delay, the width and the presynaptic time.
///
/// With the chain rule through `d = exp(-(d^s/σ)²)`:
///
/// ```text
/// ∂a/∂d^s = -(2|d^s|/σ²) · d · κ'(z + d)
/// ∂a/∂σ   = sign(d^s) · κ'(z + d) · d · 2(d^s)²/σ³
/// ∂a/∂z   = sign(d^s) · [κ'(z + d) - κ'(z + 1)]
/// ```
///
/// For the exponential kernel `κ'(x) = -e^(-x)` these reduce to the
/// closed forms asserted in the tests; the inverse kernel uses
/// `κ'(x) = -1/x²` on the shifted input, zero where the clip is active.
/// A silent presynaptic neuron yields all-zero partials.
pub fn activity_partials(
    z_pre: f64,
    d_signed: f64,
    sigma: f64,
    kernel: KernelSpec,
) -> ActivityPartials {
    if z_pre == f64::INFINITY {
        return ActivityPartials::ZERO;
    }
    let s = sign(d_signed);
    let d = delay_from_signed(d_signed, sigma);
    let kp_at_d = kernel.deriv(z_pre + d);
    let kp_at_1 = kernel.deriv(z_pre + 1.0);
    ActivityPartials {
        d_signed: -(2.0 * d_signed.abs() / (sigma * sigma)) * d * kp_at_d,
        sigma: s * kp_at_d * d * 2.0 * d_signed * d_signed / (sigma * sigma * sigma),
        z_pre: s * (kp_at_d - kp_at_1),
    }
}

/// The learnable state of one delay layer: a matrix of signed delays
/// (row = presynaptic, column = postsynaptic) and one width per
/// postsynaptic neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayParameters {
    pub signed: Array2<f64>,
    pub sigma: Array1<f64>,
}

/// Widths are clamped to this floor after every optimizer step; the
/// delay map is singular at σ = 0.
pub const SIGMA_FLOOR: f64 = 1e-3;

impl DelayParameters {
    /// Validates that `sigma` has one entry per column of `signed` and
    /// that every width is positive.
    pub fn new(signed: Array2<f64>, sigma: Array1<f64>) -> Result<Self> {
        if signed.ncols() != sigma.len() {
            return Err(DennError::ShapeMismatch(format!(
                "signed delays have {} columns but sigma has {} entries",
                signed.ncols(),
                sigma.len()
            )));
        }
        if sigma.iter().any(|&s| s <= 0.0 || s.is_nan()) {
            return Err(DennError::Domain("sigma entries must be positive".into()));
        }
        Ok(DelayParameters { signed, sigma })
    }

    /// Random initialization: signed delays uniform in `(-b, b)` with
    /// `b = sqrt(3 / n_in)`, widths at 1. The initial effective delays
    /// then spread through `(exp(-3/n_in), 1]` and every synapse starts
    /// nearly inactive.
    pub fn init<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = (3.0 / n_in as f64).sqrt();
        let signed = Array2::from_shape_simple_fn((n_in, n_out), || rng.gen_range(-bound..bound));
        DelayParameters {
            signed,
            sigma: Array1::ones(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.signed.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.signed.ncols()
    }

    /// Effective delay of one synapse.
    pub fn delay(&self, i: usize, j: usize) -> f64 {
        delay_from_signed(self.signed[(i, j)], self.sigma[j])
    }
}
