//! Shared machinery of delay layers.
//!
//! A dense layer and a convolutional layer differ only in how input
//! entries are gathered: dense layers connect every input to every
//! output, convolutions gather a sliding patch and share one column of
//! signed delays per output channel. Both reduce to the same core
//! computation on a `(taps × positions)` matrix of presynaptic times:
//!
//! ```text
//! t[out, pos] = Σ_tap sign(d^s)·[κ(z[tap,pos] + d) - κ(z[tap,pos] + 1)]
//! ```
//!
//! For the exponential kernel the whole product factorizes through
//! `κ(z + d) = e^(-z)·e^(-d)`, so the forward pass is one matrix product
//! of `u = e^(-z)` against coefficients that depend only on parameters.
//! Those coefficients are computed once per optimizer step and reused
//! across the samples of a batch.

use ndarray::{Array1, Array2};

use crate::delay::{delay_from_signed, sign, DelayParameters};
use crate::kernel::KernelSpec;

/// Parameters plus kernel of one delay layer, on the internal
/// `(taps × outs)` layout. For a dense layer taps = inputs and there is a
/// single position; for a convolution taps = `c_in·k·k` and outs = output
/// channels, evaluated at every output position.
#[derive(Debug, Clone)]
pub struct DelayCore {
    pub params: DelayParameters,
    pub kernel: KernelSpec,
}

/// Per-parameter coefficients reused across the samples of a batch.
#[derive(Debug, Clone)]
pub enum CoreCache {
    /// Exponential kernel factorization.
    Exp {
        /// `sign·(e^(-d) - e^(-1))`; activity = `u · coef_a`.
        coef_a: Array2<f64>,
        /// `(2|d^s|/σ²)·d·e^(-d)`; ∂a/∂d^s = `u · coef_dp`.
        coef_dp: Array2<f64>,
        /// `-sign·(2(d^s)²/σ³)·d·e^(-d)`; ∂a/∂σ = `u · coef_sp`.
        coef_sp: Array2<f64>,
    },
    /// Generic path: only the effective delays are precomputable.
    Generic { d: Array2<f64> },
}

/// Gradient buffers of one delay layer, accumulated across samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreGrad {
    pub signed: Array2<f64>,
    pub sigma: Array1<f64>,
}

impl CoreGrad {
    pub fn zeros_like(core: &DelayCore) -> Self {
        CoreGrad {
            signed: Array2::zeros(self::dim(&core.params)),
            sigma: Array1::zeros(core.params.n_out()),
        }
    }
}

fn dim(p: &DelayParameters) -> (usize, usize) {
    (p.n_in(), p.n_out())
}

impl DelayCore {
    pub fn taps(&self) -> usize {
        self.params.n_in()
    }

    pub fn outs(&self) -> usize {
        self.params.n_out()
    }

    /// Build the batch cache from the current parameters.
    pub fn cache(&self) -> CoreCache {
        let signed = &self.params.signed;
        let sigma = &self.params.sigma;
        match self.kernel {
            KernelSpec::Exponential => {
                let e1 = (-1.0f64).exp();
                let (taps, outs) = signed.dim();
                let mut coef_a = Array2::zeros((taps, outs));
                let mut coef_dp = Array2::zeros((taps, outs));
                let mut coef_sp = Array2::zeros((taps, outs));
                for j in 0..outs {
                    let sg = sigma[j];
                    for i in 0..taps {
                        let ds = signed[(i, j)];
                        let s = sign(ds);
                        let d = delay_from_signed(ds, sg);
                        let ed = (-d).exp();
                        coef_a[(i, j)] = s * (ed - e1);
                        coef_dp[(i, j)] = 2.0 * ds.abs() / (sg * sg) * d * ed;
                        coef_sp[(i, j)] = -s * 2.0 * ds * ds / (sg * sg * sg) * d * ed;
                    }
                }
                CoreCache::Exp {
                    coef_a,
                    coef_dp,
                    coef_sp,
                }
            }
            KernelSpec::Inverse { .. } => {
                let (taps, outs) = signed.dim();
                let mut d = Array2::zeros((taps, outs));
                for j in 0..outs {
                    for i in 0..taps {
                        d[(i, j)] = delay_from_signed(signed[(i, j)], sigma[j]);
                    }
                }
                CoreCache::Generic { d }
            }
        }
    }

    /// Raw postsynaptic times for a block of positions.
    ///
    /// `z_cols` is `(taps × positions)` with `+∞` marking silent or padded
    /// entries; `u_cols` must hold `e^(-z)` (0 at silence) and is only read
    /// for the exponential kernel.
    pub fn forward(
        &self,
        cache: &CoreCache,
        z_cols: &Array2<f64>,
        u_cols: &Array2<f64>,
    ) -> Array2<f64> {
        match cache {
            CoreCache::Exp { coef_a, .. } => {
                // t = coef_aᵀ · u  — silence enters as u = 0
                coef_a.t().dot(u_cols)
            }
            CoreCache::Generic { d } => {
                let (taps, pos) = z_cols.dim();
                let outs = self.outs();
                let mut t = Array2::zeros((outs, pos));
                for p in 0..pos {
                    for i in 0..taps {
                        let z = z_cols[(i, p)];
                        if z == f64::INFINITY {
                            continue;
                        }
                        let k1 = self.kernel.eval(z + 1.0);
                        for j in 0..outs {
                            let ds = self.params.signed[(i, j)];
                            if ds == 0.0 {
                                continue;
                            }
                            t[(j, p)] += sign(ds) * (self.kernel.eval(z + d[(i, j)]) - k1);
                        }
                    }
                }
                t
            }
        }
    }

    /// Accumulate parameter gradients and return the gradient with
    /// respect to `z_cols`.
    ///
    /// `g_t` is `(outs × positions)`, the loss gradient of the raw times
    /// this core produced for the same `z_cols`.
    pub fn backward(
        &self,
        cache: &CoreCache,
        z_cols: &Array2<f64>,
        u_cols: &Array2<f64>,
        g_t: &Array2<f64>,
        grads: &mut CoreGrad,
    ) -> Array2<f64> {
        match cache {
            CoreCache::Exp {
                coef_a,
                coef_dp,
                coef_sp,
            } => {
                // m[tap, out] = Σ_pos u[tap,pos]·g_t[out,pos]
                let m = u_cols.dot(&g_t.t());
                grads.signed.scaled_add(1.0, &(&m * coef_dp));
                let sig_contrib = (&m * coef_sp).sum_axis(ndarray::Axis(0));
                grads.sigma.scaled_add(1.0, &sig_contrib);
                // ∂a/∂z = -a = -(u·coef_a), so g_z = -u ∘ (coef_a · g_t)
                let mut g_z = coef_a.dot(g_t);
                g_z.zip_mut_with(u_cols, |g, &u| *g *= -u);
                g_z
            }
            CoreCache::Generic { d } => {
                let (taps, pos) = z_cols.dim();
                let outs = self.outs();
                let mut g_z = Array2::zeros((taps, pos));
                for p in 0..pos {
                    for i in 0..taps {
                        let z = z_cols[(i, p)];
                        if z == f64::INFINITY {
                            continue;
                        }
                        let kp1 = self.kernel.deriv(z + 1.0);
                        let mut gz = 0.0;
                        for j in 0..outs {
                            let g = g_t[(j, p)];
                            if g == 0.0 {
                                continue;
                            }
                            let ds = self.params.signed[(i, j)];
                            let s = sign(ds);
                            if s == 0.0 {
                                continue;
                            }
                            let sg = self.params.sigma[j];
                            let dij = d[(i, j)];
                            let kp = self.kernel.deriv(z + dij);
                            grads.signed[(i, j)] -= g * 2.0 * ds.abs() / (sg * sg) * dij * kp;
                            grads.sigma[j] += g * s * kp * dij * 2.0 * ds * ds / (sg * sg * sg);
                            gz += g * s * (kp - kp1);
                        }
                        g_z[(i, p)] = gz;
                    }
                }
                g_z
            }
        }
    }
}

/// `e^(-z)` with silence mapped to exactly 0.
#[inline]
pub fn u_of_z(z: f64) -> f64 {
    if z == f64::INFINITY {
        0.0
    } else {
        (-z).exp()
    }
}
