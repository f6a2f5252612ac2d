//! Long-term memory across frames.
//!
//! Frame-to-frame context longer than one preprocessing window is added
//! per neuron: at frame `s`, the standardized time is corrected by terms
//! comparing it to the neuron's own output on the last `ν` frames,
//!
//! ```text
//! δ_h = z[s] - z[s-h]
//! z[s] ← z[s] + Σ_{h=1..ν} α_h · sign(δ_h) · (exp(-|δ_h|) - 1)
//! ```
//!
//! A neuron that fires earlier than it used to (`δ_h < 0`) gets pushed,
//! by default, further in the direction `α` chooses; `α_h ∈ [-1, 1]` is
//! learned per neuron and per lag, stored unconstrained and squashed
//! through `tanh`. The update is in place, so the history holds the
//! corrected values of earlier frames.
//!
//! The correction kernel `g(δ) = sign(δ)(e^(-|δ|) - 1)` is continuously
//! differentiable at zero with `g'(δ) = -e^(-|δ|)`, so the block never
//! breaks the exactness of the backward pass. Silent entries pass through
//! unchanged; lags whose history entry is silent (or missing, on early
//! frames) contribute nothing.

use ndarray::Array2;

use crate::standardize::SILENT;

/// Learned memory coefficients of one layer: `(neurons × ν)` raw values,
/// squashed through `tanh` on use. Lag `h` lives in column `h - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ltm {
    pub alpha_raw: Array2<f64>,
    pub nu: usize,
}

impl Ltm {
    /// Inert memory: all coefficients start at zero.
    pub fn new(neurons: usize, nu: usize) -> Self {
        Ltm {
            alpha_raw: Array2::zeros((neurons, nu)),
            nu,
        }
    }
}

/// Forward tape of one LTM application.
#[derive(Debug, Clone)]
pub struct LtmTape {
    /// Values entering the block (post-ReLU).
    pub z_pre: Vec<f64>,
    /// Corrected values; these are what later frames see as history.
    pub z_post: Vec<f64>,
}

#[inline]
fn g(delta: f64) -> f64 {
    if delta > 0.0 {
        (-delta).exp() - 1.0
    } else if delta < 0.0 {
        1.0 - delta.exp()
    } else {
        0.0
    }
}

#[inline]
fn g_prime(delta: f64) -> f64 {
    -(-delta.abs()).exp()
}

/// Apply the memory correction for one frame.
///
/// `history[h - 1]` is the corrected output of frame `s - h`; pass only
/// the lags that exist (early frames have fewer).
pub fn apply(ltm: &Ltm, history: &[&[f64]], z_now: &[f64]) -> LtmTape {
    debug_assert!(history.len() <= ltm.nu);
    let mut z_post = z_now.to_vec();
    for (j, z) in z_post.iter_mut().enumerate() {
        if *z == SILENT {
            continue;
        }
        let mut corr = 0.0;
        for (h, past) in history.iter().enumerate() {
            let zp = past[j];
            if zp == SILENT {
                continue;
            }
            let alpha = ltm.alpha_raw[(j, h)].tanh();
            corr += alpha * g(*z - zp);
        }
        *z += corr;
    }
    LtmTape {
        z_pre: z_now.to_vec(),
        z_post,
    }
}

/// Backward pass of one LTM application.
///
/// Given the loss gradient of the corrected values, returns the gradient
/// of the uncorrected values and, per available lag, the gradient flowing
/// into that history frame's corrected values. Accumulates into
/// `g_alpha_raw`.
pub fn backward(
    ltm: &Ltm,
    tape: &LtmTape,
    history: &[&[f64]],
    g_post: &[f64],
    g_alpha_raw: &mut Array2<f64>,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = tape.z_pre.len();
    let mut g_pre = vec![0.0; n];
    let mut g_hist = vec![vec![0.0; n]; history.len()];
    for j in 0..n {
        let z = tape.z_pre[j];
        let gp = g_post[j];
        if z == SILENT {
            continue;
        }
        let mut dz = gp;
        for (h, past) in history.iter().enumerate() {
            let zp = past[j];
            if zp == SILENT {
                continue;
            }
            let alpha = ltm.alpha_raw[(j, h)].tanh();
            let delta = z - zp;
            let gpr = g_prime(delta);
            // z_post = z + Σ α·g(z - z_h)
            dz += gp * alpha * gpr;
            g_hist[h][j] = -gp * alpha * gpr;
            g_alpha_raw[(j, h)] += gp * g(delta) * (1.0 - alpha * alpha);
        }
        g_pre[j] = dz;
    }
    (g_pre, g_hist)
}
