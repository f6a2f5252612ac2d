//! CSV diagnostics over a checkpointed network and a sample: posterior
//! traces, frame-to-frame timing differences, pre-standardization
//! spike-time histograms, per-synapse activity scatters, and the
//! activity-versus-delay curve with and without the continuity
//! correction.

use crate::delay::{sign, synaptic_activity};
use crate::error::Result;
use crate::kernel::KernelSpec;
use crate::layers::{Layer, LayerTape};
use crate::loss::temporal_softmin;
use crate::network::Network;
use crate::standardize::{StandardizedTimes, SILENT};

/// Posterior over the first `k` frames, for every prefix `k = 1..=M`.
/// Each row sums to one.
pub fn posterior_trace_csv(net: &Network, frames: &[StandardizedTimes]) -> Result<String> {
    let cache = net.build_cache();
    let (outputs, _) = net.forward(frames, &cache)?;
    let k = net.out_classes();
    let mut out = String::from("frames_seen");
    for c in 0..k {
        out.push_str(&format!(",pi_{c}"));
    }
    out.push('\n');
    for prefix in 1..=outputs.len() {
        let p = temporal_softmin(&outputs[..prefix])?;
        out.push_str(&prefix.to_string());
        for v in &p.pi {
            out.push_str(&format!(",{v:.9}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Per-layer differences between consecutive frames' output times
/// (δ = z[s] - z[s-1]); entries silent on either side are skipped.
pub fn delta_maps_csv(net: &Network, frames: &[StandardizedTimes]) -> Result<String> {
    let cache = net.build_cache();
    let (_, tape) = net.forward(frames, &cache)?;
    let mut out = String::from("layer,frame,neuron,delta\n");
    for s in 1..tape.frames.len() {
        for (l, (now, before)) in tape.frames[s]
            .layers
            .iter()
            .zip(&tape.frames[s - 1].layers)
            .enumerate()
        {
            let (LayerTape::Delay(a), LayerTape::Delay(b)) = (now, before) else {
                continue;
            };
            for (j, (zn, zb)) in a.output().iter().zip(b.output().iter()).enumerate() {
                if *zn != SILENT && *zb != SILENT {
                    out.push_str(&format!("{l},{s},{j},{:.9}\n", zn - zb));
                }
            }
        }
    }
    Ok(out)
}

/// Raw (pre-standardization) spiking times per layer and frame.
pub fn spike_histogram_csv(net: &Network, frames: &[StandardizedTimes]) -> Result<String> {
    let cache = net.build_cache();
    let (_, tape) = net.forward(frames, &cache)?;
    let mut out = String::from("layer,frame,neuron,raw_t\n");
    for (s, frame) in tape.frames.iter().enumerate() {
        for (l, lt) in frame.layers.iter().enumerate() {
            if let LayerTape::Delay(t) = lt {
                for (j, v) in t.raw_t.iter().enumerate() {
                    out.push_str(&format!("{l},{s},{j},{v:.9}\n"));
                }
            }
        }
    }
    Ok(out)
}

/// Sample skewness `E[(x-μ)³]/σ³` of a value set.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Pool the raw spiking times of one hidden layer over a set of samples.
pub fn pooled_raw_times(
    net: &Network,
    samples: &[Vec<StandardizedTimes>],
    layer_index: usize,
) -> Result<Vec<f64>> {
    let cache = net.build_cache();
    let mut pooled = Vec::new();
    for frames in samples {
        let (_, tape) = net.forward(frames, &cache)?;
        for frame in &tape.frames {
            if let LayerTape::Delay(t) = &frame.layers[layer_index] {
                pooled.extend_from_slice(&t.raw_t);
            }
        }
    }
    Ok(pooled)
}

/// Mean synaptic activity of every synapse feeding the final layer:
/// one `(input, output, activity)` row per synapse, averaged over
/// frames. Silent inputs contribute zero to the mean.
pub fn activity_scatter_csv(net: &Network, frames: &[StandardizedTimes]) -> Result<String> {
    let cache = net.build_cache();
    let (_, tape) = net.forward(frames, &cache)?;
    let last = net.layers.len() - 1;
    let Layer::Dense(d) = &net.layers[last] else {
        return Ok(String::from("input,output,mean_activity\n"));
    };
    let (taps, outs) = d.core.params.signed.dim();
    let mut sums = vec![0.0; taps * outs];
    let mut n_frames = 0usize;
    for frame in &tape.frames {
        let LayerTape::Delay(t) = &frame.layers[last] else {
            continue;
        };
        n_frames += 1;
        for i in 0..taps {
            let z = t.z_in[i];
            for j in 0..outs {
                sums[i * outs + j] += synaptic_activity(
                    z,
                    d.core.params.signed[(i, j)],
                    d.core.params.sigma[j],
                    d.core.kernel,
                );
            }
        }
    }
    let mut out = String::from("input,output,mean_activity\n");
    for i in 0..taps {
        for j in 0..outs {
            out.push_str(&format!(
                "{i},{j},{:.9}\n",
                sums[i * outs + j] / n_frames.max(1) as f64
            ));
        }
    }
    Ok(out)
}

/// Synaptic activity as a function of the delay, with and without the
/// continuity correction, at a fixed presynaptic time.
pub fn activity_curve_csv(kernel: KernelSpec, z: f64, sigma: f64) -> String {
    let mut out = String::from("d_signed,delay,activity,activity_uncorrected\n");
    let n = 400;
    for i in 0..=n {
        let ds = -4.0 + 8.0 * i as f64 / n as f64;
        let d = crate::delay::delay_from_signed(ds, sigma);
        let corrected = synaptic_activity(z, ds, sigma, kernel);
        let uncorrected = sign(ds) * kernel.eval(z + d);
        out.push_str(&format!("{ds:.4},{d:.6},{corrected:.9},{uncorrected:.9}\n"));
    }
    out
}
