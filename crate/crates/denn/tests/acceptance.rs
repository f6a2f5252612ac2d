//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! The digit-dataset criteria need the IDX files under `data/mnist/` at
//! the workspace root (or `DENN_MNIST_DIR`); everything else is
//! self-contained. The event-camera criterion runs the full binary
//! event pipeline on saccade-rendered digit streams generated from the
//! same IDX images, since the recorded event files are not
//! redistributable with the repository.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use denn::config::{EncodingKind, Preset};
use denn::data::{load_split, Dataset, Split};
use denn::energy::{count_active, denn_energy, ChipBudget, EnergyModel, OpCounts};
use denn::events::EventAccumulator;
use denn::gradcheck::{check_network, default_setups};
use denn::io::checkpoint::Checkpoint;
use denn::kernel::KernelSpec;
use denn::layers::Layer;
use denn::network::{forward_once, InputShape, LayerDesc, Network, NetworkSpec};
use denn::standardize::{standardize, RegimeConfig, StandardizedTimes, SILENT};
use denn::synth::{frame_order_task, saccade_events, SaccadeParams};
use denn::train::{train, TrainingConfig};
use denn::{cross_entropy, temporal_softmin};

fn mnist_dir() -> PathBuf {
    std::env::var("DENN_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|_| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn pass(line: &str) {
    println!("PASS {line}");
}

// ---------------------------------------------------------------------
// criterion 1 — gradient exactness on ≥ 50 random networks
// ---------------------------------------------------------------------

#[test]
fn criterion_1_gradient_exactness() {
    let started = Instant::now();
    let mut n_nets = 0;
    let mut worst = 0.0f64;
    let mut worst_desc = String::new();
    for repeat in 0..4u64 {
        for setup in default_setups(1000 + repeat * 7919) {
            let report = check_network(&setup).expect("gradcheck runs");
            n_nets += 1;
            if report.max_rel_err > worst {
                worst = report.max_rel_err;
                worst_desc = format!(
                    "kernel={:?} q={} nu={} conv={}: {}",
                    setup.kernel, setup.q, setup.nu, setup.conv, report.worst
                );
            }
            assert!(
                report.passed(),
                "criterion 1: gradients diverge from finite differences \
                 (kernel={:?} q={} nu={} conv={}): {} rel err {:.3e}",
                setup.kernel,
                setup.q,
                setup.nu,
                setup.conv,
                report.worst,
                report.max_rel_err
            );
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(n_nets >= 50, "need at least 50 networks, checked {n_nets}");
    assert!(
        secs < 300.0,
        "criterion 1 must finish in under 5 min, took {secs:.0}s"
    );
    pass(&format!(
        "criterion 1: {n_nets} networks, max rel err {worst:.3e} (worst {worst_desc}), {secs:.1}s"
    ));
}

// ---------------------------------------------------------------------
// criteria 2 & 3 — energy model
// ---------------------------------------------------------------------

#[test]
fn criterion_2_energy_reproduction() {
    let started = Instant::now();
    let cfg = Preset::Mnist.config(std::path::Path::new("."));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Network::build(&cfg.network_spec().unwrap(), &mut rng).unwrap();
    let model = EnergyModel::default();
    let slow = denn_energy(&OpCounts::from_supplied(&net, 14_804), &model, 0) * 1e6;
    let fast = denn_energy(&OpCounts::from_supplied(&net, 8_135), &model, 0) * 1e6;
    assert!(
        (slow - 73.0).abs() / 73.0 < 0.02,
        "14,804 active synapses should price at 73 µJ ± 2%, got {slow:.3}"
    );
    assert!(
        (fast - 40.0).abs() / 40.0 < 0.02,
        "8,135 active synapses should price at 40 µJ ± 2%, got {fast:.3}"
    );
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 1.0, "criterion 2 must run in under a second");
    pass(&format!(
        "criterion 2: 14,804 → {slow:.2} µJ, 8,135 → {fast:.2} µJ (targets 73/40 ± 2%)"
    ));
}

#[test]
fn criterion_3_spinnaker_constant_derivation() {
    let j = ChipBudget::default().joules_per_cycle();
    let rel = (j - 2.56e-11).abs() / 2.56e-11;
    assert!(
        rel < 0.005,
        "derived {j:.4e} J/cycle, {rel:.4} from 2.56e-11"
    );
    pass(&format!(
        "criterion 3: chip budget yields {j:.4e} J/cycle ({:.2}% from 2.56e-11)",
        rel * 100.0
    ));
}

// ---------------------------------------------------------------------
// criteria 4 & 5 — desk-scale digit training, shared across tests
// ---------------------------------------------------------------------

struct MnistArtifacts {
    q1_net: Network,
    q1_accuracy: f64,
    q1_epochs: usize,
    q05_accuracy: f64,
    q05_epochs: usize,
}

static MNIST_RUNS: OnceLock<MnistArtifacts> = OnceLock::new();

fn mnist_data() -> (Dataset, Dataset) {
    let cfg = Preset::Mnist.config(&mnist_dir());
    let train = load_split(&cfg, Split::Train, None)
        .expect("digit IDX files must sit in data/mnist (or set DENN_MNIST_DIR)");
    let test = load_split(&cfg, Split::Test, None).unwrap();
    (train, test)
}

fn mnist_runs() -> &'static MnistArtifacts {
    MNIST_RUNS.get_or_init(|| {
        let (train_data, test_data) = mnist_data();
        let run = |q: f64, kernel: KernelSpec, stop_at: f64| {
            let mut cfg = Preset::Mnist.config(&mnist_dir());
            cfg.q = q;
            cfg.kernel = kernel;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.training.seed);
            let mut net = Network::build(&cfg.network_spec().unwrap(), &mut rng).unwrap();
            let report = train(
                &mut net,
                &train_data,
                &test_data,
                &cfg.training,
                Some(stop_at),
                |_| {},
            )
            .unwrap();
            (report.best_net, report.best_accuracy, report.best_epoch + 1)
        };
        let (q1_net, q1_accuracy, q1_epochs) = run(1.0, KernelSpec::Exponential, 0.96);
        let (_, q05_accuracy, q05_epochs) = run(0.5, KernelSpec::Exponential, q1_accuracy - 0.01);
        MnistArtifacts {
            q1_net,
            q1_accuracy,
            q1_epochs,
            q05_accuracy,
            q05_epochs,
        }
    })
}

#[test]
fn criterion_4_mnist_desk_scale_training() {
    let runs = mnist_runs();
    assert!(
        runs.q1_accuracy >= 0.96,
        "slow regime reached only {:.4} within 50 epochs",
        runs.q1_accuracy
    );
    assert!(
        runs.q05_accuracy >= runs.q1_accuracy - 0.010 - 1e-9,
        "fast regime {:.4} is more than 1 point below the slow run {:.4}",
        runs.q05_accuracy,
        runs.q1_accuracy
    );
    pass(&format!(
        "criterion 4: q=1 reaches {:.4} in {} epochs; q=0.5 reaches {:.4} in {} epochs (gap {:.2} pts)",
        runs.q1_accuracy,
        runs.q1_epochs,
        runs.q05_accuracy,
        runs.q05_epochs,
        (runs.q1_accuracy - runs.q05_accuracy) * 100.0
    ));

    // informational: the trained hidden layer's raw spike times should
    // be close to Gaussian (per-class |skewness| averaging below 0.5)
    let (_, test_data) = mnist_data();
    let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); 10];
    let cache = runs.q1_net.build_cache();
    for (sample, &label) in test_data.samples.iter().zip(&test_data.labels).take(2000) {
        if let Ok((_, tape)) = runs.q1_net.forward(&sample.times(), &cache) {
            if let denn::layers::LayerTape::Delay(t) = &tape.frames[0].layers[0] {
                per_class[label as usize].extend_from_slice(&t.raw_t);
            }
        }
    }
    let mean_abs_skew = per_class
        .iter()
        .filter(|v| v.len() > 100)
        .map(|v| denn::diagnostics::skewness(v).abs())
        .sum::<f64>()
        / 10.0;
    println!(
        "INFO criterion 4 addendum: hidden-layer raw-time skewness |γ| averaged per class = {mean_abs_skew:.3} ({})",
        if mean_abs_skew < 0.5 { "approximately Gaussian" } else { "heavier-tailed than Gaussian" }
    );
}

#[test]
fn criterion_5_fast_regime_sparsity() {
    let runs = mnist_runs();
    let (_, test_data) = mnist_data();
    let census = |q: f64| {
        let mut net = runs.q1_net.clone();
        net.set_regime(RegimeConfig { q });
        let cache = net.build_cache();
        let tapes: Vec<_> = test_data
            .samples
            .iter()
            .filter_map(|s| net.forward(&s.times(), &cache).ok().map(|(_, t)| t))
            .collect();
        count_active(&net, &tapes).mean_active()
    };
    let slow = census(1.0);
    let fast = census(0.5);
    let ratio = fast / slow;
    assert!(
        (0.45..=0.65).contains(&ratio),
        "fast/slow active-synapse ratio {ratio:.3} outside [0.45, 0.65] ({fast:.0}/{slow:.0})"
    );
    pass(&format!(
        "criterion 5: mean active synapses {fast:.0} (q=0.5) vs {slow:.0} (q=1), ratio {ratio:.3} ∈ [0.45, 0.65]"
    ));
}

// ---------------------------------------------------------------------
// criterion 6 — event2time correctness against a brute-force oracle
// ---------------------------------------------------------------------

/// List-keeping reimplementation of the frame builder.
struct BruteForce {
    lists: Vec<Vec<u64>>,
    threshold: f64,
}

impl BruteForce {
    fn new(n_pixels: usize, r: f64) -> Self {
        BruteForce {
            lists: vec![Vec::new(); 2 * n_pixels],
            threshold: 2.0 * r * n_pixels as f64,
        }
    }

    fn push(&mut self, cell: usize, t: u64) -> Option<Vec<f64>> {
        self.lists[cell].push(t);
        let active = self.lists.iter().filter(|l| !l.is_empty()).count();
        if (active as f64) > self.threshold {
            let frame = self
                .lists
                .iter()
                .map(|l| {
                    if l.is_empty() {
                        SILENT
                    } else {
                        let max = *l.iter().max().unwrap();
                        let min = *l.iter().min().unwrap();
                        (max - min) as f64 / l.len() as f64
                    }
                })
                .collect();
            for l in &mut self.lists {
                l.clear();
            }
            Some(frame)
        } else {
            None
        }
    }
}

#[test]
fn criterion_6_event2time_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut frames_checked = 0usize;
    for stream_idx in 0..1000 {
        let w = rng.gen_range(2..6);
        let h = rng.gen_range(1..5);
        let r = rng.gen_range(0.05..0.6);
        let n_events = rng.gen_range(5..300);
        // non-decreasing timestamps with occasional ties
        let mut t = 0u64;
        let events: Vec<denn::events::Event> = (0..n_events)
            .map(|_| {
                t += rng.gen_range(0..4);
                denn::events::Event {
                    t,
                    x: rng.gen_range(0..w as u16),
                    y: rng.gen_range(0..h as u16),
                    p: if rng.gen::<bool>() { 1 } else { -1 },
                }
            })
            .collect();

        // 1) streaming vs bulk equivalence (standardized frames)
        let mut bulk = EventAccumulator::new(w, h, r).unwrap();
        let bulk_seq = bulk.process_all(&events).unwrap();
        let mut streaming = EventAccumulator::new(w, h, r).unwrap();
        let mut stream_frames = Vec::new();
        for &e in &events {
            if let Some(raw) = streaming.push(e).unwrap() {
                if let Some(f) = streaming.standardize_frame(raw) {
                    stream_frames.push(f);
                }
            }
        }
        if let Some(raw) = streaming.finalize() {
            if let Some(f) = streaming.standardize_frame(raw) {
                stream_frames.push(f);
            }
        }
        assert_eq!(
            bulk_seq.frames, stream_frames,
            "stream {stream_idx}: streaming and bulk disagree"
        );

        // 2) raw values match the list-keeping oracle exactly, and every
        //    non-partial frame exceeds the threshold
        let mut acc = EventAccumulator::new(w, h, r).unwrap();
        let mut oracle = BruteForce::new(w * h, r);
        for &e in &events {
            let cell = acc.cell_index(&e);
            let got = acc.push(e).unwrap();
            let want = oracle.push(cell, e.t);
            match (got, want) {
                (None, None) => {}
                (Some(raw), Some(expected)) => {
                    assert_eq!(
                        raw.times, expected,
                        "stream {stream_idx}: frame values differ"
                    );
                    let active = raw.times.iter().filter(|v| **v != SILENT).count();
                    assert!(
                        active as f64 > 2.0 * r * (w * h) as f64,
                        "stream {stream_idx}: emitted frame below threshold"
                    );
                    assert!(!raw.partial);
                    frames_checked += 1;
                }
                (got, want) => panic!(
                    "stream {stream_idx}: emission mismatch (streaming {:?} vs oracle {:?})",
                    got.is_some(),
                    want.is_some()
                ),
            }
        }
    }
    assert!(
        frames_checked > 1000,
        "only {frames_checked} frames exercised"
    );
    pass(&format!(
        "criterion 6: 1000 random streams, {frames_checked} frames match the brute-force oracle exactly"
    ));
}

// ---------------------------------------------------------------------
// criterion 7 — event-camera digit pipeline at desk scale
// ---------------------------------------------------------------------

#[test]
fn criterion_7_event_digit_desk_scale() {
    let started = Instant::now();
    // render real digit images into binary event files (the recorded
    // event dataset is not redistributable; the saccade renderer feeds
    // the identical on-disk format and pipeline)
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = Preset::Nmnist.config(tmp.path());
    let idx_cfg = {
        let mut c = Preset::Mnist.config(&mnist_dir());
        c.encoding = EncodingKind::Intensity;
        c
    };
    let images =
        denn::io::idx::read_idx_images(&idx_cfg.dataset.path.join("train-images-idx3-ubyte"))
            .expect("digit IDX files must sit in data/mnist (or set DENN_MNIST_DIR)");
    assert_eq!(
        (images.count, images.rows, images.cols),
        (60_000, 28, 28),
        "the standard training file header"
    );
    let labels =
        denn::io::idx::read_idx_labels(&idx_cfg.dataset.path.join("train-labels-idx1-ubyte"))
            .unwrap();
    assert_eq!(
        labels.len(),
        images.count,
        "label count matches image count"
    );

    let n_train = 2000;
    let n_test = 500;
    for split in ["train", "test"] {
        for class in 0..10 {
            std::fs::create_dir_all(tmp.path().join(split).join(class.to_string())).unwrap();
        }
    }
    let params = SaccadeParams::default();
    for (i, &label) in labels.iter().enumerate().take(n_train + n_test) {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + i as u64);
        let events = saccade_events(images.image(i), 28, 28, &params, &mut rng);
        let split = if i < n_train { "train" } else { "test" };
        let path = tmp
            .path()
            .join(split)
            .join(label.to_string())
            .join(format!("{i:05}.bin"));
        denn::io::nmnist::write_events(&path, &events).unwrap();
    }

    cfg.training.epochs = 10;
    let train_data = load_split(&cfg, Split::Train, None).unwrap();
    let test_data = load_split(&cfg, Split::Test, None).unwrap();
    assert_eq!(train_data.len(), n_train);
    assert_eq!(test_data.len(), n_test);
    let mean_frames: f64 = train_data
        .samples
        .iter()
        .map(|s| s.len() as f64)
        .sum::<f64>()
        / train_data.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.training.seed);
    let mut net = Network::build(&cfg.network_spec().unwrap(), &mut rng).unwrap();
    let mut train_losses = Vec::new();
    let report = train(
        &mut net,
        &train_data,
        &test_data,
        &cfg.training,
        None,
        |row| {
            if row.split == "train" {
                train_losses.push(row.loss);
            }
        },
    )
    .unwrap();

    for pair in train_losses[..5].windows(2) {
        assert!(
            pair[1] < pair[0],
            "training loss must strictly decrease over the first 5 epochs: {train_losses:?}"
        );
    }
    assert!(
        report.best_accuracy >= 0.80,
        "held-out accuracy {:.4} below 0.80 (losses {train_losses:?})",
        report.best_accuracy
    );
    pass(&format!(
        "criterion 7: event-rendered digits (M̄ = {mean_frames:.1} frames): {:.4} held-out accuracy after {} epochs, first-5 losses strictly decreasing ({:.0}s)",
        report.best_accuracy,
        cfg.training.epochs,
        started.elapsed().as_secs_f64()
    ));
}

// ---------------------------------------------------------------------
// criterion 8 — memory inertness and effect
// ---------------------------------------------------------------------

#[test]
fn criterion_8_memory_inertness_and_effect() {
    // (a) α_raw = 0 ⇒ bit-identical outputs to ν = 0
    let spec = |nu: usize| NetworkSpec {
        input: InputShape::Flat(8),
        layers: vec![LayerDesc::Dense { out: 12 }, LayerDesc::Dense { out: 2 }],
        kernel: KernelSpec::Exponential,
        regime: RegimeConfig::SLOW,
        nu,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let with_memory = Network::build(&spec(3), &mut rng).unwrap();
    let mut without = with_memory.clone();
    for layer in &mut without.layers {
        match layer {
            Layer::Dense(d) => d.ltm = None,
            Layer::Conv(c) => c.ltm = None,
            Layer::MinPool { .. } => {}
        }
    }
    let frames: Vec<StandardizedTimes> = (0..5)
        .map(|s| {
            let t: Vec<f64> = (0..8).map(|i| ((i + 3 * s) as f64 * 0.77).sin()).collect();
            StandardizedTimes::new(standardize(&t).unwrap().times.values)
        })
        .collect();
    let (a, _) = forward_once(&with_memory, &frames).unwrap();
    let (b, _) = forward_once(&without, &frames).unwrap();
    assert_eq!(a, b, "inert memory must be bit-identical to no memory");

    // (b) a task carried *only* by frame order
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let (train_raw, train_labels) = frame_order_task(8, 150, 0.05, &mut rng);
    let (test_raw, test_labels) = frame_order_task(8, 100, 0.05, &mut rng);
    let to_dataset = |raw: Vec<Vec<Vec<f64>>>, labels: Vec<u8>| Dataset {
        samples: raw
            .into_iter()
            .map(|frames| denn::events::FrameSequence {
                frames: frames
                    .into_iter()
                    .map(|t| denn::events::Frame {
                        times: StandardizedTimes::new(standardize(&t).unwrap().times.values),
                        span: 0,
                        partial: false,
                    })
                    .collect(),
            })
            .collect(),
        labels,
        n_classes: 2,
        skipped: 0,
    };
    let train_data = to_dataset(train_raw, train_labels);
    let test_data = to_dataset(test_raw, test_labels);

    let cfg = TrainingConfig {
        learning_rate: 0.01,
        batch_size: 32,
        epochs: 60,
        scheduler: denn::optim::Scheduler::None,
        seed: 5,
    };
    let run = |nu: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = Network::build(&spec(nu), &mut rng).unwrap();
        train(&mut net, &train_data, &test_data, &cfg, Some(0.95), |_| {})
            .unwrap()
            .best_accuracy
    };
    let ordered = run(2);
    let memoryless = run(0);
    assert!(
        ordered > 0.90,
        "ν = 2 model should exceed 0.90 on the order task, got {ordered:.4}"
    );
    assert!(
        memoryless <= 0.60,
        "ν = 0 model must stay at chance on an order-only task, got {memoryless:.4}"
    );
    pass(&format!(
        "criterion 8: inert memory bit-identical; order task: ν=2 reaches {ordered:.3}, ν=0 stays at {memoryless:.3}"
    ));
}

// ---------------------------------------------------------------------
// criterion 9 — invariant suites
// ---------------------------------------------------------------------

#[test]
fn criterion_9_invariant_suites() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    // posterior normalization ≤ 1e-12
    for _ in 0..500 {
        let m = rng.gen_range(1..6);
        let k = rng.gen_range(2..8);
        let outputs: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..k).map(|_| rng.gen_range(-4.0..4.0)).collect())
            .collect();
        let p = temporal_softmin(&outputs).unwrap();
        assert!((p.pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(p.pi.iter().all(|&x| x > 0.0));
    }

    // standardization moments ≤ 1e-9 (with silent entries mixed in)
    for _ in 0..500 {
        let n = rng.gen_range(3..200);
        let t: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    SILENT
                } else {
                    rng.gen_range(-10.0..10.0)
                }
            })
            .collect();
        let Ok(out) = standardize(&t) else { continue };
        let vals: Vec<f64> = out
            .times
            .values
            .iter()
            .copied()
            .filter(|v| *v != SILENT)
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() <= 1e-9, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() <= 1e-9);
    }

    // continuity at d^s = 0: |activity(z, ±1e-6)| ≤ 1e-5·(κ(z) + 1)
    for kernel in [KernelSpec::Exponential, KernelSpec::inverse()] {
        for _ in 0..2000 {
            let z = rng.gen_range(-3.0..3.0);
            let sigma = rng.gen_range(0.2..5.0);
            let bound = 1e-5 * (kernel.eval(z) + 1.0);
            let plus = denn::synaptic_activity(z, 1e-6, sigma, kernel);
            let minus = denn::synaptic_activity(z, -1e-6, sigma, kernel);
            assert!(plus.abs() <= bound && minus.abs() <= bound);
            assert!((plus - minus).abs() <= 2.0 * bound);
        }
    }

    // conv/dense unrolling equivalence ≤ 1e-12 (raw times over a random
    // conv layer vs its unrolled dense twin)
    conv_dense_equivalence(&mut rng);

    // checkpoint round-trip: save → load → forward is bit-identical
    let spec = NetworkSpec {
        input: InputShape::Flat(12),
        layers: vec![LayerDesc::Dense { out: 9 }, LayerDesc::Dense { out: 4 }],
        kernel: KernelSpec::Exponential,
        regime: RegimeConfig::FAST,
        nu: 2,
    };
    let net = Network::build(&spec, &mut rng).unwrap();
    let frames: Vec<StandardizedTimes> = (0..3)
        .map(|s| {
            let t: Vec<f64> = (0..12)
                .map(|i| ((i * 5 + s * 11) as f64 * 0.37).sin())
                .collect();
            StandardizedTimes::new(standardize(&t).unwrap().times.values)
        })
        .collect();
    let (before, _) = forward_once(&net, &frames).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roundtrip.denn");
    Checkpoint::capture(&net, None, 1, 2, 3)
        .save(&path)
        .unwrap();
    let mut restored = Network::build(&spec, &mut ChaCha8Rng::seed_from_u64(4242)).unwrap();
    Checkpoint::load(&path)
        .unwrap()
        .restore_params(&mut restored)
        .unwrap();
    let (after, _) = forward_once(&restored, &frames).unwrap();
    let before_bits: Vec<Vec<u64>> = before
        .iter()
        .map(|f| f.iter().map(|v| v.to_bits()).collect())
        .collect();
    let after_bits: Vec<Vec<u64>> = after
        .iter()
        .map(|f| f.iter().map(|v| v.to_bits()).collect())
        .collect();
    assert_eq!(
        before_bits, after_bits,
        "checkpoint round-trip must be bit-identical"
    );

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 600.0, "criterion 9 must finish in under 10 min");
    pass(&format!(
        "criterion 9: invariant suites green in {secs:.1}s"
    ));
}

fn conv_dense_equivalence(rng: &mut ChaCha8Rng) {
    use denn::layers::{ConvGeometry, ConvLayer, CoreGrad, DelayCore, DenseLayer};
    use ndarray::{Array1, Array2};

    let geom = ConvGeometry::new((2, 6, 6), 3, 3, 1, 0).unwrap();
    let conv = ConvLayer {
        core: DelayCore {
            params: denn::DelayParameters::init(geom.taps(), 3, rng),
            kernel: KernelSpec::Exponential,
        },
        geom,
        regime: RegimeConfig::SLOW,
        ltm: None,
        standardize: true,
    };
    let n_in = conv.geom.in_len();
    let n_pos = conv.geom.n_positions();
    let taps = conv.geom.taps();
    let n_out = conv.geom.out_len();

    let mut signed = Array2::zeros((n_in, n_out));
    let mut sigma = Array1::zeros(n_out);
    for co in 0..3 {
        for pos in 0..n_pos {
            let j = co * n_pos + pos;
            sigma[j] = conv.core.params.sigma[co];
            for tap in 0..taps {
                let idx = conv.geom.patch_index(pos, tap);
                if idx >= 0 {
                    signed[(idx as usize, j)] = conv.core.params.signed[(tap, co)];
                }
            }
        }
    }
    let dense = DenseLayer {
        core: DelayCore {
            params: denn::DelayParameters::new(signed, sigma).unwrap(),
            kernel: KernelSpec::Exponential,
        },
        regime: RegimeConfig::SLOW,
        ltm: None,
        standardize: true,
    };

    let t: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let z_in = StandardizedTimes::new(standardize(&t).unwrap().times.values);
    let conv_tape = conv.forward(&conv.core.cache(), &z_in, &[]).unwrap();
    let dense_tape = dense.forward(&dense.core.cache(), &z_in, &[]).unwrap();
    for (a, b) in conv_tape.raw_t.iter().zip(&dense_tape.raw_t) {
        assert!(
            (a - b).abs() <= 1e-12,
            "conv/dense raw times differ: {a} vs {b}"
        );
    }

    // gradients agree after summing dense entries over shared positions
    let g_raw: Vec<f64> = (0..n_out)
        .map(|j| ((j * 13 % 7) as f64 - 3.0) * 0.21)
        .collect();
    let mut cg = CoreGrad::zeros_like(&conv.core);
    conv.backward_raw(&conv.core.cache(), &conv_tape, &g_raw, &mut cg);
    let mut dg = CoreGrad::zeros_like(&dense.core);
    dense.backward_raw(&dense.core.cache(), &dense_tape, &g_raw, &mut dg);
    for co in 0..3 {
        for tap in 0..taps {
            let mut sum = 0.0;
            for pos in 0..n_pos {
                let idx = conv.geom.patch_index(pos, tap);
                if idx >= 0 {
                    sum += dg.signed[(idx as usize, co * n_pos + pos)];
                }
            }
            assert!(
                (cg.signed[(tap, co)] - sum).abs() <= 1e-12,
                "conv/dense filter gradients differ"
            );
        }
    }
}

// ---------------------------------------------------------------------
// criterion 10 — inverse-kernel training (non-gating)
// ---------------------------------------------------------------------

#[test]
fn criterion_10_inverse_kernel_path() {
    let (train_data, test_data) = mnist_data();
    let mut cfg = Preset::Mnist.config(&mnist_dir());
    cfg.kernel = KernelSpec::inverse();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.training.seed);
    let mut net = Network::build(&cfg.network_spec().unwrap(), &mut rng).unwrap();
    let report = train(
        &mut net,
        &train_data,
        &test_data,
        &cfg.training,
        Some(0.94),
        |_| {},
    )
    .unwrap();
    // stated as non-gating: report honestly either way, fail the test
    // only if the run collapses entirely
    if report.best_accuracy >= 0.94 {
        pass(&format!(
            "criterion 10 (non-gating): inverse kernel reaches {:.4} in {} epochs",
            report.best_accuracy,
            report.best_epoch + 1
        ));
    } else {
        println!(
            "WARN criterion 10 (non-gating): inverse kernel reached {:.4} < 0.94 within {} epochs",
            report.best_accuracy, cfg.training.epochs
        );
        assert!(
            report.best_accuracy > 0.85,
            "inverse-kernel run collapsed: {:.4}",
            report.best_accuracy
        );
    }
}

// ---------------------------------------------------------------------
// large architectures: build + one forward/backward with finite grads
// ---------------------------------------------------------------------

#[test]
fn large_architecture_smoke_tests() {
    for preset in [Preset::Cifar10, Preset::DvsGesture, Preset::Gsc] {
        let cfg = preset.config(std::path::Path::new("."));
        let spec = cfg.network_spec().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::build(&spec, &mut rng).unwrap();
        let n_in = net.input_len();
        let m = if cfg.preprocess.nu > 0 { 4 } else { 1 };
        let frames: Vec<StandardizedTimes> = (0..m)
            .map(|s| {
                let t: Vec<f64> = (0..n_in)
                    .map(|i| ((i * 7 + s * 31) as f64 * 0.193).sin())
                    .collect();
                StandardizedTimes::new(standardize(&t).unwrap().times.values)
            })
            .collect();
        let cache = net.build_cache();
        let (outputs, tape) = net.forward(&frames, &cache).unwrap();
        let loss = cross_entropy(&outputs, 0).unwrap();
        assert!(loss.loss.is_finite());
        let grads = net.backward(&tape, &loss.grads, &cache).unwrap();
        let mut n_finite = 0usize;
        for g in net.grad_tensors(&grads) {
            assert!(g.iter().all(|v| v.is_finite()), "non-finite gradient");
            n_finite += g.len();
        }
        println!(
            "smoke {:?}: {} delays, loss {:.4}, {} finite gradient entries",
            preset,
            net.n_delays(),
            loss.loss,
            n_finite
        );
        // the reference delay counts of the event-camera stacks
        match preset {
            Preset::DvsGesture => assert_eq!(net.n_delays(), 19_216),
            Preset::Gsc => assert_eq!(net.n_delays(), 155_392),
            _ => {}
        }
    }
    pass("large architectures: build + forward/backward smoke with finite gradients");
}
