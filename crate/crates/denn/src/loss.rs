//! Temporal softmin posterior and the cross-entropy loss on top of it.
//!
//! A sample's per-frame output times are aggregated into class
//! pseudo-probabilities with a softmin over *all frames at once*:
//!
//! ```text
//! π_c = Σ_s e^(-z_c[s]) / Σ_s Σ_j e^(-z_j[s])
//! ```
//!
//! Earlier (smaller) times mean more evidence and silent outputs
//! contribute `e^(-∞) = 0`. The expression is invariant to adding one
//! constant to every time of every frame — the factor cancels — and the
//! implementation exploits exactly that global shift for numerical
//! stability. Per-frame shifts would *not* cancel and are never applied.
//!
//! The gradient of `L = -log π_target` with respect to an individual
//! output time follows the same double-sum structure:
//!
//! ```text
//! ∂L/∂z_l[s] = e^(-z_l[s]) · (δ_{l,target} - π_target) / (π_target · D)
//! ```
//!
//! with `D` the full denominator. For a single frame this collapses to
//! the familiar softmax jacobian.

use crate::error::{DennError, Result};
use crate::standardize::SILENT;

/// Class pseudo-probabilities; sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPosterior {
    pub pi: Vec<f64>,
}

/// π_target is clipped at this floor before the logarithm; the trainer
/// counts how often that fires.
pub const PI_FLOOR: f64 = 1e-30;

/// Global shift: the smallest finite output time across frames and
/// classes.
fn global_min(outputs: &[Vec<f64>]) -> Option<f64> {
    let mut m = f64::INFINITY;
    for frame in outputs {
        for &z in frame {
            if z < m {
                m = z;
            }
        }
    }
    (m != f64::INFINITY).then_some(m)
}

/// Aggregate per-frame output times into the class posterior.
///
/// Errors when every output on every frame is silent.
pub fn temporal_softmin(outputs: &[Vec<f64>]) -> Result<ClassPosterior> {
    if outputs.is_empty() {
        return Err(DennError::Config(
            "posterior needs at least one frame".into(),
        ));
    }
    let k = outputs[0].len();
    let shift = global_min(outputs).ok_or(DennError::DegeneratePosterior)?;
    let mut numer = vec![0.0; k];
    let mut denom = 0.0;
    for frame in outputs {
        debug_assert_eq!(frame.len(), k);
        for (c, &z) in frame.iter().enumerate() {
            if z == SILENT {
                continue;
            }
            let e = (shift - z).exp();
            numer[c] += e;
            denom += e;
        }
    }
    if denom <= 0.0 {
        return Err(DennError::DegeneratePosterior);
    }
    Ok(ClassPosterior {
        pi: numer.into_iter().map(|n| n / denom).collect(),
    })
}

/// Cross-entropy of the posterior plus its exact gradient with respect
/// to every per-frame output time.
pub struct LossOutput {
    pub loss: f64,
    /// One gradient vector per frame, aligned with the outputs.
    pub grads: Vec<Vec<f64>>,
    pub posterior: ClassPosterior,
    /// True when π_target hit the clip floor.
    pub clipped: bool,
}

pub fn cross_entropy(outputs: &[Vec<f64>], target: usize) -> Result<LossOutput> {
    let posterior = temporal_softmin(outputs)?;
    let k = posterior.pi.len();
    if target >= k {
        return Err(DennError::Config(format!(
            "target class {target} out of range for {k} classes"
        )));
    }
    let clipped = posterior.pi[target] < PI_FLOOR;
    let pi_t = posterior.pi[target].max(PI_FLOOR);
    let loss = -pi_t.ln();

    // shared factors of the gradient; recompute the stabilized numerators
    let shift = global_min(outputs).expect("checked by softmin");
    let mut denom = 0.0;
    for frame in outputs {
        for &z in frame {
            if z != SILENT {
                denom += (shift - z).exp();
            }
        }
    }
    // ∂L/∂z_l[s] = e^(-z)·(δ - π_t)/(π_t·D), with e^(-z)/D evaluated in
    // shifted form for stability
    let grads = outputs
        .iter()
        .map(|frame| {
            frame
                .iter()
                .enumerate()
                .map(|(l, &z)| {
                    if z == SILENT {
                        return 0.0;
                    }
                    let w = (shift - z).exp() / denom;
                    let delta = if l == target { 1.0 } else { 0.0 };
                    w * (delta - posterior.pi[target]) / pi_t
                })
                .collect()
        })
        .collect();
    Ok(LossOutput {
        loss,
        grads,
        posterior,
        clipped,
    })
}
