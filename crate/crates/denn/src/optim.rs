//! Gradient normalization, Adam, and learning-rate scheduling.
//!
//! Gradients are normalized per layer and per tensor by the Frobenius
//! norm before the update — but only downwards: each tensor is divided
//! by `max(1, ‖g‖_F)`, which caps the norm at one without erasing the
//! magnitude of already-small gradients near convergence. Direction is
//! never changed.

use serde::{Deserialize, Serialize};

use crate::network::{NetGradients, Network};

/// Divide each gradient tensor by `max(1, ‖g‖_F)`, per layer and per
/// tensor (signed delays, widths and memory coefficients separately).
pub fn frobenius_normalize(grads: &mut NetGradients) {
    fn cap(t: &mut [f64]) {
        let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 {
            let inv = 1.0 / norm;
            for v in t {
                *v *= inv;
            }
        }
    }
    for g in grads.layers.iter_mut().flatten() {
        cap(g.core.signed.as_slice_mut().expect("contiguous"));
        cap(g.core.sigma.as_slice_mut().expect("contiguous"));
        if let Some(a) = g.alpha.as_mut() {
            cap(a.as_slice_mut().expect("contiguous"));
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates per parameter tensor, plus the step
/// counter for bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    /// One `(m, v)` pair per tensor, aligned with
    /// [`Network::param_tensors`].
    pub moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        AdamState {
            step: 0,
            moments: net
                .param_tensors()
                .iter()
                .map(|(_, _, t)| (vec![0.0; t.len()], vec![0.0; t.len()]))
                .collect(),
        }
    }
}

/// One Adam update with bias correction. Widths are clamped to their
/// floor afterwards.
pub fn adam_step(net: &mut Network, grads: &NetGradients, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    let grad_tensors: Vec<Vec<f64>> = net
        .grad_tensors(grads)
        .into_iter()
        .map(|g| g.to_vec())
        .collect();
    for ((_, _kind, params), (grad, (m, v))) in net
        .param_tensors_mut()
        .into_iter()
        .zip(grad_tensors.iter().zip(state.moments.iter_mut()))
    {
        debug_assert_eq!(params.len(), grad.len());
        for i in 0..params.len() {
            let g = grad[i];
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    net.clamp_sigma();
}

/// Learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    #[default]
    None,
    /// Half-cosine from the base rate down to zero over the configured
    /// number of epochs.
    CosineAnnealing,
}

impl Scheduler {
    pub fn rate(&self, base: f64, epoch: usize, total_epochs: usize) -> f64 {
        match self {
            Scheduler::None => base,
            Scheduler::CosineAnnealing => {
                let total = total_epochs.max(1) as f64;
                base * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / total).cos())
            }
        }
    }
}
