//! Cross-module property tests: statistical behavior of the frame
//! builder, the standardization/shift equivalence, and regime survivor
//! counts on messy inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use denn::events::{Event, EventAccumulator};
use denn::kernel::KernelSpec;
use denn::standardize::{standardize, temp_relu, RegimeConfig, StandardizedTimes, SILENT};

/// With i.i.d. inter-event gaps of mean Δm, a frame closes after about
/// 2rN events, so its wall-clock span averages ≈ Δm·2rN (the handful of
/// repeat hits before the threshold crossing adds only a few percent at
/// small r).
#[test]
fn mean_frame_span_tracks_gap_times_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (w, h) = (40, 25); // N = 1000 pixels, 2000 cells
    let r = 0.05; // threshold 2rN = 100 active cells
    let mean_gap = 5.0;
    let mut t = 0u64;
    let events: Vec<Event> = (0..120_000)
        .map(|_| {
            // integer gaps 0..=10 average 5
            t += rng.gen_range(0..=10);
            Event {
                t,
                x: rng.gen_range(0..w as u16),
                y: rng.gen_range(0..h as u16),
                p: if rng.gen::<bool>() { 1 } else { -1 },
            }
        })
        .collect();
    let mut acc = EventAccumulator::new(w, h, r).unwrap();
    let mut spans = Vec::new();
    for &e in &events {
        if let Some(raw) = acc.push(e).unwrap() {
            if !raw.partial {
                spans.push(raw.span as f64);
            }
        }
    }
    assert!(spans.len() > 500, "need many frames, got {}", spans.len());
    let mean_span = spans.iter().sum::<f64>() / spans.len() as f64;
    let expected = mean_gap * 2.0 * r * (w * h) as f64;
    let ratio = mean_span / expected;
    assert!(
        (0.9..=1.1).contains(&ratio),
        "mean span {mean_span:.1} vs Δm·2rN = {expected:.1} (ratio {ratio:.3})"
    );
}

/// For a fixed span, more events in a cell make the cell strictly
/// faster.
#[test]
fn cell_time_decreases_with_activity() {
    let span = 600.0;
    let mut prev = f64::INFINITY;
    for count in 1..50u32 {
        let t = span / count as f64;
        assert!(t < prev, "t must strictly decrease with event count");
        prev = t;
    }
}

/// When the raw times have population spread exactly 1 and a symmetric
/// distribution (mean = median), evaluating the kernel on standardized
/// values equals evaluating it on raw values shifted by the median.
#[test]
fn standardization_equals_median_shift_at_unit_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for kernel in [KernelSpec::Exponential, KernelSpec::inverse()] {
        for _ in 0..200 {
            // symmetric set: {c ± v_i} has mean = median = c
            let half: Vec<f64> = (0..rng.gen_range(2..20))
                .map(|_| rng.gen_range(0.01..3.0))
                .collect();
            let c = rng.gen_range(-5.0..5.0);
            let mut t: Vec<f64> = half.iter().flat_map(|v| [c + v, c - v]).collect();
            // rescale to population std exactly 1
            let out = standardize(&t).unwrap();
            let std = out.std;
            for v in &mut t {
                *v = c + (*v - c) / std;
            }
            let out = standardize(&t).unwrap();
            assert!((out.std - 1.0).abs() < 1e-9);
            let median = c; // by symmetry
            for (z, raw) in out.times.values.iter().zip(&t) {
                for d in [0.05, 0.3, 1.0] {
                    let a = kernel.eval(z + d);
                    let b = kernel.eval(raw + d - median);
                    assert!(
                        (a - b).abs() <= 1e-12 * a.abs().max(1.0),
                        "{kernel:?}: κ(z+d) = {a} vs κ(t+d-median) = {b}"
                    );
                }
            }
        }
    }
}

/// Fast-regime survivor counts stay within one of ⌈n_valid·q⌉ even with
/// repeated values.
#[test]
fn fast_regime_survivor_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..500 {
        let n = rng.gen_range(4..100);
        let values: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    SILENT
                } else {
                    // coarse grid induces plenty of ties
                    (rng.gen_range(-8..8) as f64) * 0.5
                }
            })
            .collect();
        let z = StandardizedTimes::new(values);
        let n_valid = z.n_valid();
        if n_valid < 2 {
            continue;
        }
        let (_, survive) = temp_relu(&z, RegimeConfig::FAST);
        let kept = survive.iter().filter(|&&s| s).count() as f64;
        let expect = (n_valid as f64 * 0.5).ceil();
        assert!(
            (kept - expect).abs() <= 1.0 + ties_at_cutoff(&z) as f64,
            "kept {kept} of {n_valid} valid (expected ≈ {expect})"
        );
        // survivors never exceed the valid population
        assert!(kept as usize <= n_valid);
    }
}

fn ties_at_cutoff(z: &StandardizedTimes) -> usize {
    use denn::standardize::empirical_quantile;
    let mut finite: Vec<f64> = z.values.iter().copied().filter(|v| *v != SILENT).collect();
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cutoff = empirical_quantile(&finite, 0.5);
    finite.iter().filter(|v| **v == cutoff).count()
}

/// Evaluating samples in any order gives bit-identical per-sample
/// outputs (per-sample standardization, no cross-sample state).
#[test]
fn per_sample_independence_bit_exact() {
    use denn::network::{InputShape, LayerDesc, Network, NetworkSpec};

    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let net = Network::build(
        &NetworkSpec {
            input: InputShape::Flat(10),
            layers: vec![LayerDesc::Dense { out: 12 }, LayerDesc::Dense { out: 4 }],
            kernel: KernelSpec::Exponential,
            regime: RegimeConfig::FAST,
            nu: 2,
        },
        &mut rng,
    )
    .unwrap();
    let cache = net.build_cache();
    let samples: Vec<Vec<StandardizedTimes>> = (0..8)
        .map(|s| {
            (0..3)
                .map(|f| {
                    let t: Vec<f64> = (0..10)
                        .map(|i| ((i * 3 + s * 7 + f * 13) as f64 * 0.29).sin())
                        .collect();
                    StandardizedTimes::new(standardize(&t).unwrap().times.values)
                })
                .collect()
        })
        .collect();
    let forward_bits = |frames: &[StandardizedTimes]| -> Vec<u64> {
        let (out, _) = net.forward(frames, &cache).unwrap();
        out.iter().flatten().map(|v| v.to_bits()).collect()
    };
    let in_order: Vec<Vec<u64>> = samples.iter().map(|s| forward_bits(s)).collect();
    let reversed: Vec<Vec<u64>> = samples.iter().rev().map(|s| forward_bits(s)).collect();
    for (a, b) in in_order.iter().zip(reversed.iter().rev()) {
        assert_eq!(a, b);
    }
}
