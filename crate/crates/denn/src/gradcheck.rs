//! Finite-difference verification of the analytic gradients.
//!
//! For a sampled network and input, every learnable scalar is perturbed
//! by ±1e-6 and the central difference of the loss is compared with the
//! backward pass. The comparison is
//!
//! ```text
//! |analytic - fd| ≤ rtol·max(|analytic|, |fd|, atol/rtol)
//! ```
//!
//! with `rtol = 1e-6` and `atol = 1e-8·max(1, |loss|)`: the absolute
//! floor is the roundoff noise a double-precision central difference of
//! the loss itself carries (machine epsilon of the O(1) kernel terms,
//! divided by the step), so the bound is exactly "relative error ≤ 1e-6
//! wherever a finite difference can resolve it".
//!
//! The temporal ReLU and the pool argmin make the loss piecewise smooth,
//! so sampled points must stay away from mask-flip boundaries; the
//! sampler measures those margins and redraws when any value sits within
//! 1e-4 of a switch (quantile cutoffs, pool ties, zero signed delays,
//! zero memory deltas, the inverse kernel's clip).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::delay::delay_from_signed;
use crate::error::{DennError, Result};
use crate::kernel::KernelSpec;
use crate::layers::{Layer, LayerTape};
use crate::loss::cross_entropy;
use crate::network::{InputShape, LayerDesc, Network, NetworkSpec, SampleTape};
use crate::standardize::{
    empirical_quantile, standardize, RegimeConfig, StandardizedTimes, SILENT,
};

pub const FD_STEP: f64 = 1e-6;
pub const RTOL: f64 = 1e-6;
const MASK_MARGIN: f64 = 1e-4;

/// One gradcheck scenario.
#[derive(Debug, Clone, Copy)]
pub struct CheckSetup {
    pub kernel: KernelSpec,
    pub q: f64,
    pub nu: usize,
    pub conv: bool,
    pub seed: u64,
}

/// Result of checking one network.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub max_rel_err: f64,
    pub n_params: usize,
    pub worst: String,
    pub loss: f64,
    /// Networks redrawn before one cleared the mask margins.
    pub resamples: usize,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= RTOL
    }
}

fn sample_spec(setup: &CheckSetup, rng: &mut ChaCha8Rng) -> NetworkSpec {
    let regime = RegimeConfig { q: setup.q };
    if setup.conv {
        NetworkSpec {
            input: InputShape::Map(2, 6, 6),
            layers: vec![
                LayerDesc::Conv {
                    filters: rng.gen_range(2..4),
                    k: 3,
                    stride: 1,
                    padding: 0,
                },
                LayerDesc::MinPool,
                LayerDesc::Dense { out: 3 },
            ],
            kernel: setup.kernel,
            regime,
            nu: setup.nu,
        }
    } else {
        NetworkSpec {
            input: InputShape::Flat(rng.gen_range(5..8)),
            layers: vec![
                LayerDesc::Dense {
                    out: rng.gen_range(6..10),
                },
                LayerDesc::Dense {
                    out: rng.gen_range(5..8),
                },
                LayerDesc::Dense { out: 4 },
            ],
            kernel: setup.kernel,
            regime,
            nu: setup.nu,
        }
    }
}

fn sample_frames(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<StandardizedTimes> {
    (0..m)
        .map(|_| {
            let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            StandardizedTimes::new(standardize(&t).expect("random spread").times.values)
        })
        .collect()
}

/// Distance of the forward state from the nearest mask flip.
fn quantile_margin(values: &[f64], q: f64) -> f64 {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| *v != SILENT).collect();
    if finite.len() < 2 {
        return f64::INFINITY;
    }
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cutoff = empirical_quantile(&finite, q);
    finite
        .iter()
        .map(|v| (v - cutoff).abs())
        .fold(f64::INFINITY, f64::min)
}

fn mask_margin(net: &Network, frames: &[StandardizedTimes], tape: &SampleTape) -> f64 {
    let mut margin = f64::INFINITY;
    if !net.input_regime.is_identity() {
        for frame in frames {
            margin = margin.min(quantile_margin(&frame.values, net.input_regime.q));
        }
    }
    for frame in &tape.frames {
        for (layer, lt) in net.layers.iter().zip(&frame.layers) {
            match (layer, lt) {
                (Layer::Dense(d), LayerTape::Delay(t)) => {
                    if !d.regime.is_identity() {
                        margin = margin.min(quantile_margin(&t.z_std, d.regime.q));
                    }
                    margin = margin.min(core_margins(
                        &d.core.params.signed,
                        &d.core.params.sigma,
                        &t.z_in,
                        d.core.kernel,
                    ));
                }
                (Layer::Conv(c), LayerTape::Delay(t)) => {
                    if !c.regime.is_identity() {
                        margin = margin.min(quantile_margin(&t.z_std, c.regime.q));
                    }
                    margin = margin.min(core_margins(
                        &c.core.params.signed,
                        &c.core.params.sigma,
                        &t.z_in,
                        c.core.kernel,
                    ));
                }
                _ => {}
            }
        }
        // pool tie margins need the pool inputs: walk (producer, pool) pairs
        for l in 0..net.layers.len() {
            if let (Layer::MinPool { in_shape }, LayerTape::MinPool(_)) =
                (&net.layers[l], &frame.layers[l])
            {
                let input: Vec<f64> = if l == 0 {
                    frame.input.values.clone()
                } else {
                    match &frame.layers[l - 1] {
                        LayerTape::Delay(t) => t.output(),
                        LayerTape::MinPool(_) => continue,
                    }
                };
                margin = margin.min(pool_gap(&input, *in_shape));
            }
        }
    }
    margin
}

/// Smallest |d^s| plus, for the inverse kernel, the distance of every
/// kernel input from the clip boundary.
fn core_margins(
    signed: &ndarray::Array2<f64>,
    sigma: &ndarray::Array1<f64>,
    z_in: &[f64],
    kernel: KernelSpec,
) -> f64 {
    let mut margin = f64::INFINITY;
    for v in signed.iter() {
        margin = margin.min(v.abs());
    }
    if let KernelSpec::Inverse { .. } = kernel {
        // gather distances from the clip for every (input, synapse) pair
        let (taps, outs) = signed.dim();
        for (i, &z) in z_in.iter().enumerate() {
            if z == SILENT {
                continue;
            }
            margin = margin.min(kernel.smoothness_margin(z + 1.0));
            if i < taps {
                for j in 0..outs {
                    let d = delay_from_signed(signed[(i, j)], sigma[j]);
                    margin = margin.min(kernel.smoothness_margin(z + d));
                }
            }
        }
    }
    margin
}

fn pool_gap(input: &[f64], in_shape: (usize, usize, usize)) -> f64 {
    let (c, h, w) = in_shape;
    let mut margin = f64::INFINITY;
    let (ho, wo) = (h / 2, w / 2);
    for ch in 0..c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut vals: Vec<f64> = Vec::with_capacity(4);
                for dy in 0..2 {
                    for dx in 0..2 {
                        let v = input[(ch * h + oy * 2 + dy) * w + ox * 2 + dx];
                        if v != SILENT {
                            vals.push(v);
                        }
                    }
                }
                if vals.len() >= 2 {
                    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    margin = margin.min(vals[1] - vals[0]);
                }
            }
        }
    }
    margin
}

/// LTM δ margins over a full tape.
fn ltm_delta_margin(net: &Network, tape: &SampleTape) -> f64 {
    let mut margin = f64::INFINITY;
    for s in 0..tape.frames.len() {
        for (l, layer) in net.layers.iter().enumerate() {
            let Some(ltm) = layer.ltm() else { continue };
            let LayerTape::Delay(t) = &tape.frames[s].layers[l] else {
                continue;
            };
            let Some(lt) = &t.ltm else { continue };
            let avail = ltm.nu.min(s);
            for h in 1..=avail {
                let LayerTape::Delay(past) = &tape.frames[s - h].layers[l] else {
                    continue;
                };
                let past_post = &past.ltm.as_ref().expect("ltm tape").z_post;
                for (now, before) in lt.z_pre.iter().zip(past_post) {
                    if *now != SILENT && *before != SILENT {
                        margin = margin.min((now - before).abs());
                    }
                }
            }
        }
    }
    margin
}

fn loss_of(net: &Network, frames: &[StandardizedTimes], target: usize) -> Result<f64> {
    let (outputs, _) = net.forward(frames, &net.build_cache())?;
    Ok(cross_entropy(&outputs, target)?.loss)
}

/// Check one sampled network; redraws until the sample clears the mask
/// margins, then compares every parameter gradient against central
/// finite differences.
pub fn check_network(setup: &CheckSetup) -> Result<CheckReport> {
    let mut resamples = 0;
    let mut seed = setup.seed;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = sample_spec(setup, &mut rng);
        let net = Network::build(&spec, &mut rng)?;
        let m = if setup.nu > 0 { 3 } else { 2 };
        let frames = sample_frames(net.input_len(), m, &mut rng);
        let target = rng.gen_range(0..net.out_classes());

        let cache = net.build_cache();
        let (outputs, tape) = match net.forward(&frames, &cache) {
            Ok(x) => x,
            Err(DennError::DegenerateLayer(_)) => {
                resamples += 1;
                seed = seed.wrapping_add(0x9e37_79b9);
                continue;
            }
            Err(e) => return Err(e),
        };
        let margin = mask_margin(&net, &frames, &tape).min(ltm_delta_margin(&net, &tape));
        if margin < MASK_MARGIN {
            resamples += 1;
            seed = seed.wrapping_add(0x9e37_79b9);
            if resamples > 200 {
                return Err(DennError::Config(
                    "could not sample a margin-clear network".into(),
                ));
            }
            continue;
        }

        let loss = cross_entropy(&outputs, target)?;
        let analytic = net.backward(&tape, &loss.grads, &cache)?;
        // the loss is assembled from O(1) kernel terms, so each evaluation
        // carries absolute rounding noise around machine-eps of those
        // intermediates; divided by the step that floors what a central
        // difference can resolve
        let atol = 1e-8 * loss.loss.abs().max(1.0);
        let floor = atol / RTOL;

        let names: Vec<(String, usize)> = net
            .param_tensors()
            .iter()
            .map(|(n, _, t)| (n.clone(), t.len()))
            .collect();
        let analytic_flat: Vec<Vec<f64>> = net
            .grad_tensors(&analytic)
            .into_iter()
            .map(|t| t.to_vec())
            .collect();

        let mut net = net;
        let mut max_rel = 0.0f64;
        let mut worst = String::new();
        let mut n_params = 0;
        for (ti, (name, len)) in names.iter().enumerate() {
            for (i, &a) in analytic_flat[ti].iter().enumerate().take(*len) {
                let nudge = |net: &mut Network, delta: f64| {
                    net.param_tensors_mut()[ti].2[i] += delta;
                };
                nudge(&mut net, FD_STEP);
                let up = loss_of(&net, &frames, target)?;
                nudge(&mut net, -2.0 * FD_STEP);
                let down = loss_of(&net, &frames, target)?;
                nudge(&mut net, FD_STEP);
                let fd = (up - down) / (2.0 * FD_STEP);
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
                if rel > max_rel {
                    max_rel = rel;
                    worst = format!("{name}[{i}] analytic {a:.3e} fd {fd:.3e}");
                }
                n_params += 1;
            }
        }
        return Ok(CheckReport {
            max_rel_err: max_rel,
            n_params,
            worst,
            loss: loss.loss,
            resamples,
        });
    }
}

/// The standard grid: dense and conv topologies, both kernels, slow and
/// fast regimes, with and without memory.
pub fn default_setups(seed: u64) -> Vec<CheckSetup> {
    let mut setups = Vec::new();
    let mut s = seed;
    for kernel in [KernelSpec::Exponential, KernelSpec::inverse()] {
        for q in [1.0, 0.5] {
            for nu in [0usize, 2] {
                for conv in [false, true] {
                    s = s.wrapping_add(1);
                    setups.push(CheckSetup {
                        kernel,
                        q,
                        nu,
                        conv,
                        seed: s,
                    });
                }
            }
        }
    }
    setups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_slow_regime_passes() {
        let report = check_network(&CheckSetup {
            kernel: KernelSpec::Exponential,
            q: 1.0,
            nu: 0,
            conv: false,
            seed: 41,
        })
        .unwrap();
        assert!(
            report.passed(),
            "max rel err {}: {}",
            report.max_rel_err,
            report.worst
        );
    }

    #[test]
    fn conv_fast_regime_with_memory_passes() {
        let report = check_network(&CheckSetup {
            kernel: KernelSpec::Exponential,
            q: 0.5,
            nu: 2,
            conv: true,
            seed: 42,
        })
        .unwrap();
        assert!(
            report.passed(),
            "max rel err {}: {}",
            report.max_rel_err,
            report.worst
        );
    }

    #[test]
    fn inverse_kernel_passes() {
        let report = check_network(&CheckSetup {
            kernel: KernelSpec::inverse(),
            q: 1.0,
            nu: 0,
            conv: false,
            seed: 43,
        })
        .unwrap();
        assert!(
            report.passed(),
            "max rel err {}: {}",
            report.max_rel_err,
            report.worst
        );
    }
}
