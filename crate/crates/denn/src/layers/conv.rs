//! Convolutional delay layers.
//!
//! The filter bank holds one signed delay per (output channel, input
//! channel, tap) and one σ per output channel, mirroring how the filters
//! are shared. Inputs are gathered into patch columns, the shared
//! [`DelayCore`](super::DelayCore) evaluates every output position at
//! once, and the layer output — all channels and positions jointly — is
//! standardized and passed through the temporal ReLU.
//!
//! Padding, where a preset asks for it, inserts *silent* entries: a
//! padded tap behaves exactly like a neuron that never fired and
//! contributes nothing.

use ndarray::Array2;

use super::delay_core::{u_of_z, CoreCache, CoreGrad, DelayCore};
use super::{finish_delay_forward, DelayTape, Ltm};
use crate::error::{DennError, Result};
use crate::kernel::KernelSpec;
use crate::standardize::{RegimeConfig, StandardizedTimes, SILENT};

/// Static geometry of a convolution: shapes, stride, padding and the
/// flat gather map from output positions to input indices.
#[derive(Debug, Clone)]
pub struct ConvGeometry {
    pub in_shape: (usize, usize, usize),
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
    pub h_out: usize,
    pub w_out: usize,
    /// `patch_idx[pos·taps + tap]` = flat input index, or -1 for padding.
    patch_idx: Vec<i32>,
}

impl ConvGeometry {
    pub fn new(
        in_shape: (usize, usize, usize),
        c_out: usize,
        k: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let (c_in, h, w) = in_shape;
        if k == 0 || stride == 0 || c_in == 0 || c_out == 0 {
            return Err(DennError::Config("conv dims must be positive".into()));
        }
        let h_pad = h + 2 * padding;
        let w_pad = w + 2 * padding;
        if h_pad < k || w_pad < k {
            return Err(DennError::ShapeMismatch(format!(
                "kernel {k} larger than padded input {h_pad}×{w_pad}"
            )));
        }
        let h_out = (h_pad - k) / stride + 1;
        let w_out = (w_pad - k) / stride + 1;
        let taps = c_in * k * k;
        let n_pos = h_out * w_out;
        let mut patch_idx = vec![-1i32; n_pos * taps];
        for oy in 0..h_out {
            for ox in 0..w_out {
                let pos = oy * w_out + ox;
                for ci in 0..c_in {
                    for ky in 0..k {
                        for kx in 0..k {
                            let tap = (ci * k + ky) * k + kx;
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                patch_idx[pos * taps + tap] =
                                    ((ci * h + iy as usize) * w + ix as usize) as i32;
                            }
                        }
                    }
                }
            }
        }
        Ok(ConvGeometry {
            in_shape,
            c_out,
            k,
            stride,
            padding,
            h_out,
            w_out,
            patch_idx,
        })
    }

    pub fn taps(&self) -> usize {
        self.in_shape.0 * self.k * self.k
    }

    pub fn n_positions(&self) -> usize {
        self.h_out * self.w_out
    }

    pub fn in_len(&self) -> usize {
        self.in_shape.0 * self.in_shape.1 * self.in_shape.2
    }

    pub fn out_len(&self) -> usize {
        self.c_out * self.n_positions()
    }

    pub fn out_shape(&self) -> (usize, usize, usize) {
        (self.c_out, self.h_out, self.w_out)
    }

    /// Flat input index feeding `(position, tap)`, or -1 for padding.
    pub fn patch_index(&self, pos: usize, tap: usize) -> i32 {
        self.patch_idx[pos * self.taps() + tap]
    }

    /// Gather flat input values into `(taps × positions)` columns,
    /// writing `pad` at padded taps.
    fn gather(&self, flat: &[f64], pad: f64) -> Array2<f64> {
        let taps = self.taps();
        let n_pos = self.n_positions();
        let mut cols = Array2::zeros((taps, n_pos));
        for pos in 0..n_pos {
            for tap in 0..taps {
                let idx = self.patch_idx[pos * taps + tap];
                cols[(tap, pos)] = if idx < 0 { pad } else { flat[idx as usize] };
            }
        }
        cols
    }

    /// Scatter-accumulate `(taps × positions)` gradients back onto the
    /// flat input, summing over overlapping patches.
    fn scatter(&self, cols: &Array2<f64>) -> Vec<f64> {
        let taps = self.taps();
        let mut flat = vec![0.0; self.in_len()];
        for pos in 0..self.n_positions() {
            for tap in 0..taps {
                let idx = self.patch_idx[pos * taps + tap];
                if idx >= 0 {
                    flat[idx as usize] += cols[(tap, pos)];
                }
            }
        }
        flat
    }
}

/// Convolutional delay layer: shared filters on the `(taps × c_out)`
/// layout, one σ per output channel.
#[derive(Debug, Clone)]
pub struct ConvLayer {
    pub core: DelayCore,
    pub geom: ConvGeometry,
    pub regime: RegimeConfig,
    pub ltm: Option<Ltm>,
    /// See [`DenseLayer::standardize`](super::DenseLayer::standardize).
    pub standardize: bool,
}

impl ConvLayer {
    pub fn forward(
        &self,
        cache: &CoreCache,
        z_in: &StandardizedTimes,
        history: &[&[f64]],
    ) -> Result<DelayTape> {
        if z_in.len() != self.geom.in_len() {
            return Err(DennError::ShapeMismatch(format!(
                "conv expects {} inputs, got {}",
                self.geom.in_len(),
                z_in.len()
            )));
        }
        let exp_path = matches!(self.core.kernel, KernelSpec::Exponential);
        let z_cols = self.geom.gather(&z_in.values, SILENT);
        let (u, u_cols) = if exp_path {
            let u: Vec<f64> = z_in.values.iter().map(|&z| u_of_z(z)).collect();
            let cols = self.geom.gather(&u, 0.0);
            (Some(u), cols)
        } else {
            (
                None,
                Array2::zeros((self.geom.taps(), self.geom.n_positions())),
            )
        };
        // (c_out × positions), flattened row-major = (channel, y, x)
        let raw = self.core.forward(cache, &z_cols, &u_cols);
        let raw_t: Vec<f64> = raw.iter().copied().collect();
        finish_delay_forward(
            &z_in.values,
            u,
            raw_t,
            self.regime,
            self.standardize,
            self.ltm.as_ref(),
            history,
        )
    }

    pub fn backward_raw(
        &self,
        cache: &CoreCache,
        tape: &DelayTape,
        g_raw: &[f64],
        grads: &mut CoreGrad,
    ) -> Vec<f64> {
        let z_cols = self.geom.gather(&tape.z_in, SILENT);
        let u_cols = match &tape.u_in {
            Some(u) => self.geom.gather(u, 0.0),
            None => Array2::zeros((self.geom.taps(), self.geom.n_positions())),
        };
        let g_t =
            Array2::from_shape_vec((self.geom.c_out, self.geom.n_positions()), g_raw.to_vec())
                .expect("grad shape");
        let g_cols = self.core.backward(cache, &z_cols, &u_cols, &g_t, grads);
        self.geom.scatter(&g_cols)
    }
}
