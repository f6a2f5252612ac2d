//! Delay-network layers: fully connected, convolutional, min-pooling,
//! each with an exact analytic backward pass, plus per-neuron long-term
//! memory attachable behind any delay layer.
//!
//! A delay layer computes raw postsynaptic times as activity sums over
//! its (non-silent) inputs, standardizes them across the whole layer
//! output, then applies the temporal ReLU of its regime. The tape each
//! forward pass returns carries exactly what the backward pass needs:
//! the inputs, the raw times, the standardization statistics and the
//! survival mask.

pub mod conv;
pub mod delay_core;
pub mod ltm;
pub mod minpool;

use ndarray::Array2;

use crate::error::Result;
use crate::kernel::KernelSpec;
use crate::standardize::{standardize, temp_relu, RegimeConfig, StandardizedTimes, SILENT};

pub use conv::{ConvGeometry, ConvLayer};
pub use delay_core::{u_of_z, CoreCache, CoreGrad, DelayCore};
pub use ltm::{Ltm, LtmTape};
pub use minpool::PoolTape;

/// One layer of a network.
#[derive(Debug, Clone)]
pub enum Layer {
    Dense(DenseLayer),
    Conv(ConvLayer),
    MinPool { in_shape: (usize, usize, usize) },
}

/// Fully connected delay layer.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub core: DelayCore,
    pub regime: RegimeConfig,
    pub ltm: Option<Ltm>,
    /// Standardize the raw sums (the normal case). Final layers with
    /// fewer than three neurons skip it: standardizing two values always
    /// yields ±1, which freezes the loss gradient.
    pub standardize: bool,
}

/// Batch-level cache per layer (parameter-dependent only).
#[derive(Debug, Clone)]
pub enum LayerCache {
    Delay(CoreCache),
    None,
}

/// Forward record of one layer on one frame.
#[derive(Debug, Clone)]
pub enum LayerTape {
    Delay(DelayTape),
    MinPool(PoolTape),
}

/// Tape of a dense or convolutional layer.
#[derive(Debug, Clone)]
pub struct DelayTape {
    /// Input times (flat), silence as `+∞`.
    pub z_in: Vec<f64>,
    /// `e^(-z_in)` when the exponential fast path is active.
    pub u_in: Option<Vec<f64>>,
    /// Raw activity sums before standardization.
    pub raw_t: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Standardized times before the temporal ReLU.
    pub z_std: Vec<f64>,
    /// Survival mask after the temporal ReLU.
    pub survive: Vec<bool>,
    /// Memory tape when the layer carries LTM.
    pub ltm: Option<LtmTape>,
}

impl DelayTape {
    /// The layer's final output for this frame.
    pub fn output(&self) -> Vec<f64> {
        if let Some(t) = &self.ltm {
            return t.z_post.clone();
        }
        self.z_std
            .iter()
            .zip(&self.survive)
            .map(|(&z, &s)| if s { z } else { SILENT })
            .collect()
    }

    /// Values after the temporal ReLU, before any memory correction.
    pub fn post_relu(&self) -> Vec<f64> {
        self.z_std
            .iter()
            .zip(&self.survive)
            .map(|(&z, &s)| if s { z } else { SILENT })
            .collect()
    }

    pub fn n_silent_in(&self) -> usize {
        self.z_in.iter().filter(|&&z| z == SILENT).count()
    }
}

impl Layer {
    pub fn cache(&self) -> LayerCache {
        match self {
            Layer::Dense(l) => LayerCache::Delay(l.core.cache()),
            Layer::Conv(l) => LayerCache::Delay(l.core.cache()),
            Layer::MinPool { .. } => LayerCache::None,
        }
    }

    pub fn out_len(&self) -> usize {
        match self {
            Layer::Dense(l) => l.core.outs(),
            Layer::Conv(l) => l.geom.out_len(),
            Layer::MinPool { in_shape } => {
                let (c, h, w) = minpool::out_shape(*in_shape);
                c * h * w
            }
        }
    }

    pub fn in_len(&self) -> usize {
        match self {
            Layer::Dense(l) => l.core.taps(),
            Layer::Conv(l) => l.geom.in_len(),
            Layer::MinPool { in_shape } => in_shape.0 * in_shape.1 * in_shape.2,
        }
    }

    pub fn ltm(&self) -> Option<&Ltm> {
        match self {
            Layer::Dense(l) => l.ltm.as_ref(),
            Layer::Conv(l) => l.ltm.as_ref(),
            Layer::MinPool { .. } => None,
        }
    }

    pub fn ltm_mut(&mut self) -> Option<&mut Ltm> {
        match self {
            Layer::Dense(l) => l.ltm.as_mut(),
            Layer::Conv(l) => l.ltm.as_mut(),
            Layer::MinPool { .. } => None,
        }
    }

    pub fn core(&self) -> Option<&DelayCore> {
        match self {
            Layer::Dense(l) => Some(&l.core),
            Layer::Conv(l) => Some(&l.core),
            Layer::MinPool { .. } => None,
        }
    }

    pub fn core_mut(&mut self) -> Option<&mut DelayCore> {
        match self {
            Layer::Dense(l) => Some(&mut l.core),
            Layer::Conv(l) => Some(&mut l.core),
            Layer::MinPool { .. } => None,
        }
    }
}

/// Shared tail of every delay layer: standardize the raw sums over the
/// whole layer output, apply the temporal ReLU, then the memory
/// correction when present.
fn finish_delay_forward(
    z_in: &[f64],
    u_in: Option<Vec<f64>>,
    raw_t: Vec<f64>,
    regime: RegimeConfig,
    do_standardize: bool,
    ltm: Option<&Ltm>,
    history: &[&[f64]],
) -> Result<DelayTape> {
    let (z_std, mean, std) = if do_standardize {
        let out = standardize(&raw_t)?;
        (out.times, out.mean, out.std)
    } else {
        (StandardizedTimes::new(raw_t.clone()), 0.0, 1.0)
    };
    let (post, survive) = temp_relu(&z_std, regime);
    let ltm_tape = ltm.map(|m| ltm::apply(m, history, &post.values));
    Ok(DelayTape {
        z_in: z_in.to_vec(),
        u_in,
        raw_t,
        mean,
        std,
        z_std: z_std.values,
        survive,
        ltm: ltm_tape,
    })
}

impl DenseLayer {
    pub fn forward(
        &self,
        cache: &CoreCache,
        z_in: &StandardizedTimes,
        history: &[&[f64]],
    ) -> Result<DelayTape> {
        let n_in = z_in.len();
        let z_cols = Array2::from_shape_vec((n_in, 1), z_in.values.clone()).expect("shape");
        let exp_path = matches!(self.core.kernel, KernelSpec::Exponential);
        let u: Vec<f64> = if exp_path {
            z_in.values.iter().map(|&z| u_of_z(z)).collect()
        } else {
            Vec::new()
        };
        let u_cols = Array2::from_shape_vec(
            (n_in, 1),
            if exp_path { u.clone() } else { vec![0.0; n_in] },
        )
        .expect("shape");
        let raw = self.core.forward(cache, &z_cols, &u_cols);
        let raw_t = raw.iter().copied().collect();
        finish_delay_forward(
            &z_in.values,
            exp_path.then_some(u),
            raw_t,
            self.regime,
            self.standardize,
            self.ltm.as_ref(),
            history,
        )
    }

    /// Backward from the gradient of the raw times to parameter and
    /// input gradients.
    pub fn backward_raw(
        &self,
        cache: &CoreCache,
        tape: &DelayTape,
        g_raw: &[f64],
        grads: &mut CoreGrad,
    ) -> Vec<f64> {
        let n_in = tape.z_in.len();
        let z_cols = Array2::from_shape_vec((n_in, 1), tape.z_in.clone()).expect("shape");
        let u_cols = match &tape.u_in {
            Some(u) => Array2::from_shape_vec((n_in, 1), u.clone()).expect("shape"),
            None => Array2::zeros((n_in, 1)),
        };
        let g_t = Array2::from_shape_vec((g_raw.len(), 1), g_raw.to_vec()).expect("shape");
        let g_z = self.core.backward(cache, &z_cols, &u_cols, &g_t, grads);
        g_z.iter().copied().collect()
    }
}

/// Backward through standardization: with statistics `(m, s)` over the
/// `n` entries and standardized values `z`, the jacobian is
/// `∂z_k/∂t_j = (δ_kj - 1/n)/s - z_k·(t_j - m)/(n·s²)`, so
///
/// ```text
/// g_t[j] = (g[j] - Σg/n - z[j]·Σ(g∘z)/n) / s
/// ```
pub fn standardize_backward(z_std: &[f64], std: f64, g_z: &[f64]) -> Vec<f64> {
    let n = z_std.len() as f64;
    let mut sum_g = 0.0;
    let mut sum_gz = 0.0;
    for (g, z) in g_z.iter().zip(z_std) {
        sum_g += g;
        sum_gz += g * z;
    }
    let mean_g = sum_g / n;
    let mean_gz = sum_gz / n;
    z_std
        .iter()
        .zip(g_z)
        .map(|(&z, &g)| (g - mean_g - z * mean_gz) / std)
        .collect()
}

/// Mask the post-ReLU gradient: silenced neurons receive nothing.
pub fn relu_backward(survive: &[bool], g_post: &[f64]) -> Vec<f64> {
    survive
        .iter()
        .zip(g_post)
        .map(|(&s, &g)| if s { g } else { 0.0 })
        .collect()
}
