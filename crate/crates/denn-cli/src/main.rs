//! `denn` — train and inspect delay networks from the command line.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use denn::config::{DataFormat, Preset, RunConfig};
use denn::data::{load_split, Split};
use denn::energy::{complexity_csv, count_active, denn_energy, energy_csv, EnergyModel, OpCounts};
use denn::events::EventAccumulator;
use denn::gradcheck::{check_network, default_setups, CheckSetup};
use denn::io::checkpoint::Checkpoint;
use denn::io::{devt, frame_cache, nmnist};
use denn::kernel::KernelSpec;
use denn::network::{Network, SampleTape};
use denn::train::{evaluate, train, EpochMetrics};

#[derive(Parser)]
#[command(
    name = "denn",
    version,
    about = "Delay neural networks: synaptic-delay learning on spike times"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (also honors DENN_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run event2time over raw event files and write a frame cache.
    Preprocess(PreprocessArgs),
    /// Train a network and write the best checkpoint plus metrics CSV.
    Train(TrainArgs),
    /// Evaluate a checkpoint; optionally sweep truncated frame counts.
    Eval(EvalArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Energy and complexity audit.
    Energy(EnergyArgs),
    /// Emit CSV diagnostics for one sample of a dataset.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// Directory with one numeric subdirectory per class.
    #[arg(long)]
    input: PathBuf,
    /// Event file format inside the class directories.
    #[arg(long, value_parser = ["nmnist", "devt"])]
    format: String,
    /// Pixel grid width.
    #[arg(long)]
    width: usize,
    /// Pixel grid height.
    #[arg(long)]
    height: usize,
    /// Trigger fraction r: a frame is cut when more than 2rN cells are
    /// active.
    #[arg(long, default_value_t = 0.05)]
    r: f64,
    /// Output cache file (DFRM).
    #[arg(long)]
    output: PathBuf,
    /// Keep at most this many samples per class.
    #[arg(long)]
    limit_per_class: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Preset name: mnist | cifar10 | nmnist | dvsgesture | gsc.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// JSON run configuration (strict schema).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root (overrides the config's path).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for checkpoint, config and metrics.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Survival quantile q (1 = slow regime, 0.5 = fast regime).
    #[arg(long)]
    q: Option<f64>,
    /// Kernel: exp | inverse.
    #[arg(long)]
    kernel: Option<String>,
    /// Memory length ν.
    #[arg(long)]
    nu: Option<usize>,
    /// Use at most this many training samples.
    #[arg(long)]
    limit: Option<usize>,
    /// Use at most this many test samples.
    #[arg(long)]
    limit_test: Option<usize>,
    /// Stop once the test accuracy reaches this value.
    #[arg(long)]
    stop_at: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory written by `denn train` (contains config.json and
    /// checkpoint.denn), or pass --config/--checkpoint explicitly.
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Evaluate using only the first k frames of each sample.
    #[arg(long)]
    max_frames: Option<usize>,
    /// Sweep k = 1..=M and write accuracy_vs_frames.csv.
    #[arg(long)]
    sweep_frames: bool,
    #[arg(long)]
    limit: Option<usize>,
    /// Output directory for sweep CSVs (defaults to the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Restrict to one kernel: exp | inverse.
    #[arg(long)]
    kernel: Option<String>,
    /// Restrict to one regime.
    #[arg(long)]
    q: Option<f64>,
    /// Restrict to one memory length.
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Networks per scenario.
    #[arg(long, default_value_t = 1)]
    repeats: u64,
}

#[derive(Args)]
struct EnergyArgs {
    /// Externally supplied total active-synapse count (per object).
    #[arg(long)]
    counts: Option<u64>,
    /// Preset architecture for --counts mode.
    #[arg(long)]
    preset: Option<String>,
    /// Checkpoint + data mode: measure counts on the test split.
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    limit: Option<usize>,
    /// Override the survival quantile at audit time.
    #[arg(long)]
    q: Option<f64>,
    /// Write the CSV report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Run directory written by `denn train`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Sample index within the test split.
    #[arg(long, default_value_t = 0)]
    sample: usize,
    /// Output directory for the CSV bundle.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("DENN_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        rayon_thread_pool(n)?;
    }
    match cli.command {
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Energy(args) => cmd_energy(args),
        Command::Diagnose(args) => cmd_diagnose(args),
    }
}

fn rayon_thread_pool(n: usize) -> Result<()> {
    denn::rayon_global_threads(n).map_err(|e| anyhow!("{e}"))
}

fn parse_kernel(name: &str) -> Result<KernelSpec> {
    match name {
        "exp" | "exponential" => Ok(KernelSpec::Exponential),
        "inverse" | "inv" => Ok(KernelSpec::inverse()),
        other => bail!("unknown kernel '{other}' (use exp or inverse)"),
    }
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    let format = match args.format.as_str() {
        "nmnist" => DataFormat::NmnistBinary,
        "devt" => DataFormat::CanonicalEvent,
        _ => unreachable!("clap validates"),
    };
    let started = Instant::now();
    // collect per-class files, deterministic order
    let mut class_dirs: Vec<(usize, PathBuf)> = Vec::new();
    for entry in
        fs::read_dir(&args.input).with_context(|| format!("reading {}", args.input.display()))?
    {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            if let Ok(label) = entry.file_name().to_string_lossy().parse::<usize>() {
                class_dirs.push((label, entry.path()));
            }
        }
    }
    if class_dirs.is_empty() {
        bail!(
            "{} has no numeric class subdirectories",
            args.input.display()
        );
    }
    class_dirs.sort();
    let mut sequences = Vec::new();
    let mut labels = Vec::new();
    let mut skipped = 0usize;
    let mut total_frames = 0usize;
    let mut total_span = 0u128;
    let mut span_count = 0u128;
    for (label, dir) in &class_dirs {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        if let Some(limit) = args.limit_per_class {
            files.truncate(limit);
        }
        for file in files {
            let events = match format {
                DataFormat::NmnistBinary => nmnist::read_events(&file)?,
                DataFormat::CanonicalEvent => devt::read_events(&file)?,
                _ => unreachable!(),
            };
            if events.is_empty() {
                eprintln!("warning: {} is empty, skipping", file.display());
                skipped += 1;
                continue;
            }
            let mut acc = EventAccumulator::new(args.width, args.height, args.r)?;
            let seq = acc.process_all(&events)?;
            if seq.is_empty() {
                eprintln!("warning: {} produced no frames, skipping", file.display());
                skipped += 1;
                continue;
            }
            total_frames += seq.len();
            for f in &seq.frames {
                total_span += f.span as u128;
                span_count += 1;
            }
            sequences.push(seq);
            labels.push(*label as u8);
        }
    }
    frame_cache::write_cache(&args.output, &sequences, &labels)?;
    println!(
        "wrote {}: {} samples, mean M = {:.2}, mean frame span = {:.0} µs, skipped {} ({} ms)",
        args.output.display(),
        sequences.len(),
        total_frames as f64 / sequences.len().max(1) as f64,
        total_span as f64 / span_count.max(1) as f64,
        skipped,
        started.elapsed().as_millis()
    );
    Ok(())
}

fn resolve_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), None) => {
            let data = args
                .data
                .clone()
                .ok_or_else(|| anyhow!("--preset needs --data pointing at the dataset root"))?;
            Preset::parse(name)?.config(&data)
        }
        (None, Some(path)) => {
            let mut cfg = RunConfig::load(path)?;
            if let Some(data) = &args.data {
                cfg.dataset.path = data.clone();
            }
            cfg
        }
        _ => bail!("pass exactly one of --preset or --config"),
    };
    if let Some(v) = args.epochs {
        cfg.training.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.training.batch_size = v;
    }
    if let Some(v) = args.lr {
        cfg.training.learning_rate = v;
    }
    if let Some(v) = args.seed {
        cfg.training.seed = v;
    }
    if let Some(v) = args.q {
        cfg.q = v;
    }
    if let Some(k) = &args.kernel {
        cfg.kernel = parse_kernel(k)?;
    }
    if let Some(v) = args.nu {
        cfg.preprocess.nu = v;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(cfg)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let limit = args.limit;
    let limit_test = args.limit_test;
    let stop_at = args.stop_at;
    let cfg = resolve_config(&args)?;
    fs::create_dir_all(&cfg.output_dir)?;

    let started = Instant::now();
    let train_data = load_split(&cfg, Split::Train, limit)?;
    let test_data = load_split(&cfg, Split::Test, limit_test)?;
    println!(
        "loaded {} train / {} test samples ({} skipped at load)",
        train_data.len(),
        test_data.len(),
        train_data.skipped + test_data.skipped
    );

    let spec = cfg.network_spec()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.training.seed);
    let mut net = Network::build(&spec, &mut rng)?;
    println!(
        "network: {} delays + {} total learnable scalars",
        net.n_delays(),
        net.n_params()
    );

    let metrics_path = cfg.output_dir.join("metrics.csv");
    let mut metrics_rows = vec![EpochMetrics::csv_header().to_string()];
    let report = train(
        &mut net,
        &train_data,
        &test_data,
        &cfg.training,
        stop_at,
        |row| {
            println!("{}", row.csv_row());
            metrics_rows.push(row.csv_row());
        },
    )?;
    fs::write(&metrics_path, metrics_rows.join("\n") + "\n")?;

    let ckpt = Checkpoint::capture(
        &report.best_net,
        Some(&report.best_adam),
        cfg.training.seed,
        report.best_rng_word_pos,
        cfg.model_hash(),
    );
    let ckpt_path = cfg.output_dir.join("checkpoint.denn");
    ckpt.save(&ckpt_path)?;
    fs::write(
        cfg.output_dir.join("config.json"),
        serde_json::to_string_pretty(&cfg)?,
    )?;
    println!(
        "best test accuracy {:.4} at epoch {} — wrote {} and {} ({:.1} s)",
        report.best_accuracy,
        report.best_epoch,
        ckpt_path.display(),
        metrics_path.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn load_run(
    run: &Option<PathBuf>,
    config: &Option<PathBuf>,
    checkpoint: &Option<PathBuf>,
    data: &Option<PathBuf>,
) -> Result<(RunConfig, Network, Checkpoint)> {
    let (config_path, ckpt_path) = match (run, config, checkpoint) {
        (Some(dir), None, None) => (dir.join("config.json"), dir.join("checkpoint.denn")),
        (None, Some(c), Some(k)) => (c.clone(), k.clone()),
        _ => bail!("pass --run DIR, or both --config and --checkpoint"),
    };
    let mut cfg = RunConfig::load(&config_path)?;
    if let Some(d) = data {
        cfg.dataset.path = d.clone();
    }
    let ckpt = Checkpoint::load(&ckpt_path)?;
    match ckpt.config_hash() {
        Some(h) if h == cfg.model_hash() => {}
        Some(h) => bail!(
            "checkpoint model hash {h:#018x} does not match the configuration ({:#018x})",
            cfg.model_hash()
        ),
        None => bail!("checkpoint carries no model hash"),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.training.seed);
    let mut net = Network::build(&cfg.network_spec()?, &mut rng)?;
    ckpt.restore_params(&mut net)?;
    Ok((cfg, net, ckpt))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (cfg, net, _) = load_run(&args.run, &args.config, &args.checkpoint, &args.data)?;
    let data = load_split(&cfg, Split::Test, args.limit)?;
    let started = Instant::now();
    let result = evaluate(&net, &data, args.max_frames).map_err(|e| anyhow!("{e}"))?;
    let per_sample = started.elapsed().as_secs_f64() / data.len().max(1) as f64;
    println!(
        "top-1 accuracy {:.4} over {} samples (mean loss {:.4}, {} skipped, {:.3} ms/sample)",
        result.accuracy,
        data.len(),
        result.mean_loss,
        result.skipped,
        per_sample * 1e3
    );
    if args.sweep_frames {
        let m_max = data.samples.iter().map(|s| s.len()).max().unwrap_or(1);
        let mut csv = String::from("max_frames,accuracy\n");
        for k in 1..=m_max {
            let r = evaluate(&net, &data, Some(k))?;
            csv.push_str(&format!("{k},{:.4}\n", r.accuracy));
        }
        let out_dir = args
            .out
            .or(args.run)
            .ok_or_else(|| anyhow!("--sweep-frames needs --out or --run"))?;
        fs::create_dir_all(&out_dir)?;
        let path = out_dir.join("accuracy_vs_frames.csv");
        fs::write(&path, csv)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    let kernel_filter = args.kernel.as_deref().map(parse_kernel).transpose()?;
    let mut setups: Vec<CheckSetup> = default_setups(args.seed)
        .into_iter()
        .filter(|s| {
            kernel_filter
                .is_none_or(|k| std::mem::discriminant(&s.kernel) == std::mem::discriminant(&k))
        })
        .filter(|s| args.q.is_none_or(|q| (s.q - q).abs() < 1e-12))
        .filter(|s| args.nu.is_none_or(|nu| s.nu == nu))
        .collect();
    if args.repeats > 1 {
        let base = setups.clone();
        for r in 1..args.repeats {
            setups.extend(base.iter().map(|s| CheckSetup {
                seed: s.seed.wrapping_add(r * 7919),
                ..*s
            }));
        }
    }
    let mut failures = 0;
    let mut worst_overall = 0.0f64;
    for setup in &setups {
        let report = check_network(setup).map_err(|e| anyhow!("{e}"))?;
        worst_overall = worst_overall.max(report.max_rel_err);
        let status = if report.passed() { "ok " } else { "FAIL" };
        if !report.passed() {
            failures += 1;
        }
        println!(
            "{status} kernel={:?} q={} nu={} conv={} params={} max_rel_err={:.3e}{}",
            setup.kernel,
            setup.q,
            setup.nu,
            setup.conv,
            report.n_params,
            report.max_rel_err,
            if report.passed() {
                String::new()
            } else {
                format!("  worst: {}", report.worst)
            }
        );
    }
    println!(
        "checked {} networks, max relative error {:.3e}",
        setups.len(),
        worst_overall
    );
    if failures > 0 {
        bail!("{failures} gradcheck scenario(s) failed");
    }
    Ok(())
}

fn cmd_energy(args: EnergyArgs) -> Result<()> {
    let model = EnergyModel::default();
    let (counts, nu, n_samples, net, measured) = match (&args.counts, &args.run) {
        (Some(total), _) => {
            let preset_name = args
                .preset
                .as_deref()
                .ok_or_else(|| anyhow!("--counts needs --preset for the architecture"))?;
            let mut cfg = Preset::parse(preset_name)?.config(std::path::Path::new("."));
            if let Some(q) = args.q {
                cfg.q = q;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let net = Network::build(&cfg.network_spec()?, &mut rng)?;
            (
                OpCounts::from_supplied(&net, *total),
                cfg.preprocess.nu,
                1usize,
                net,
                false,
            )
        }
        (None, Some(_)) => {
            let (mut cfg, net, _) = load_run(&args.run, &None, &None, &args.data)?;
            if let Some(q) = args.q {
                cfg.q = q;
            }
            let mut net = net;
            net.set_regime(denn::standardize::RegimeConfig { q: cfg.q });
            let data = load_split(&cfg, Split::Test, args.limit)?;
            let cache = net.build_cache();
            let mut tapes: Vec<SampleTape> = Vec::new();
            for sample in &data.samples {
                if let Ok((_, tape)) = net.forward(&sample.times(), &cache) {
                    tapes.push(tape);
                }
            }
            let counts = count_active(&net, &tapes);
            (counts, cfg.preprocess.nu, tapes.len(), net, true)
        }
        _ => bail!("pass --counts N --preset P, or --run DIR"),
    };
    let joules = denn_energy(&counts, &model, nu);
    let per_object = joules / n_samples.max(1) as f64;
    let mut csv = energy_csv(&counts, &model, nu);
    csv.push('\n');
    csv.push_str(&complexity_csv(&net, measured.then_some(&counts))?);
    match &args.out {
        Some(path) => {
            fs::write(path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    println!(
        "mean active synapses per object: {:.1}",
        counts.mean_active()
    );
    println!(
        "total energy {:.3e} J over {} sample(s) = {:.2} µJ per object",
        joules,
        n_samples,
        per_object * 1e6
    );
    Ok(())
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<()> {
    use denn::diagnostics::*;
    let (cfg, net, _) = load_run(&Some(args.run.clone()), &None, &None, &args.data)?;
    let data = load_split(&cfg, Split::Test, Some(args.sample + 1))?;
    if args.sample >= data.len() {
        bail!(
            "sample {} out of range ({} loaded)",
            args.sample,
            data.len()
        );
    }
    let frames = data.samples[args.sample].times();
    fs::create_dir_all(&args.out)?;
    fs::write(
        args.out.join("posterior_trace.csv"),
        posterior_trace_csv(&net, &frames)?,
    )?;
    fs::write(
        args.out.join("delta_maps.csv"),
        delta_maps_csv(&net, &frames)?,
    )?;
    fs::write(
        args.out.join("spike_histograms.csv"),
        spike_histogram_csv(&net, &frames)?,
    )?;
    fs::write(
        args.out.join("activity_scatter.csv"),
        activity_scatter_csv(&net, &frames)?,
    )?;
    fs::write(
        args.out.join("activity_curve.csv"),
        activity_curve_csv(cfg.kernel, -1.0, 1.0),
    )?;
    // skewness of the pre-standardization times per delay layer
    let sample_frames: Vec<_> = data.samples.iter().map(|s| s.times()).collect();
    for (l, layer) in net.layers.iter().enumerate() {
        if layer.core().is_some() {
            let pooled = pooled_raw_times(&net, &sample_frames, l)?;
            println!(
                "layer {l}: raw spike-time skewness {:.4}",
                skewness(&pooled)
            );
        }
    }
    println!("wrote diagnostics to {}", args.out.display());
    Ok(())
}
