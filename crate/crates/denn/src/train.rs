//! The training loop: seeded shuffling, batched exact gradients,
//! per-layer Frobenius normalization, Adam, and CSV metrics.
//!
//! Gradients fan out over the samples of a batch in fixed-size chunks
//! and are folded back in chunk order, so the accumulated sum — and
//! with it the whole parameter trajectory — is bit-identical for a
//! given seed no matter how many worker threads run. Samples that
//! cannot be evaluated (all-silent pathological inputs) are skipped and
//! counted, never fatal.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{DennError, Result};
use crate::loss::cross_entropy;
use crate::network::{NetGradients, Network};
use crate::optim::{adam_step, frobenius_normalize, AdamState, Scheduler};

/// Samples per deterministic reduction chunk; fixed so the fold order
/// does not depend on the thread count.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub scheduler: Scheduler,
    pub seed: u64,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(DennError::Config(format!(
                "learning rate must lie in (0,1), got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(DennError::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// One metrics row; `split` is `train` or `test`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
    pub accuracy: f64,
    pub skipped_samples: usize,
}

impl EpochMetrics {
    pub fn csv_header() -> &'static str {
        "epoch,split,loss,accuracy,skipped_samples"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.4},{}",
            self.epoch, self.split, self.loss, self.accuracy, self.skipped_samples
        )
    }
}

/// Gradient sums over one set of samples, folded deterministically.
struct BatchResult {
    grads: NetGradients,
    loss_sum: f64,
    n_ok: usize,
    skipped: usize,
    clipped: usize,
}

fn batch_gradients(net: &Network, data: &Dataset, indices: &[usize]) -> Result<BatchResult> {
    let cache = net.build_cache();
    let partials: Vec<Result<BatchResult>> = indices
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grads = NetGradients::zeros_like(net);
            let mut loss_sum = 0.0;
            let mut n_ok = 0;
            let mut skipped = 0;
            let mut clipped = 0;
            for &i in chunk {
                let frames = data.samples[i].times();
                let (outputs, tape) = match net.forward(&frames, &cache) {
                    Ok(x) => x,
                    Err(DennError::DegenerateLayer(_)) | Err(DennError::DegeneratePosterior) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let loss = match cross_entropy(&outputs, data.labels[i] as usize) {
                    Ok(l) => l,
                    Err(DennError::DegeneratePosterior) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let sample_grads = net.backward(&tape, &loss.grads, &cache)?;
                grads.add_assign(&sample_grads);
                loss_sum += loss.loss;
                clipped += loss.clipped as usize;
                n_ok += 1;
            }
            Ok(BatchResult {
                grads,
                loss_sum,
                n_ok,
                skipped,
                clipped,
            })
        })
        .collect();

    let mut total = BatchResult {
        grads: NetGradients::zeros_like(net),
        loss_sum: 0.0,
        n_ok: 0,
        skipped: 0,
        clipped: 0,
    };
    for part in partials {
        let part = part?;
        total.grads.add_assign(&part.grads);
        total.loss_sum += part.loss_sum;
        total.n_ok += part.n_ok;
        total.skipped += part.skipped;
        total.clipped += part.clipped;
    }
    Ok(total)
}

/// One optimization step over one batch: mean gradient, Frobenius cap,
/// Adam. Returns `(mean loss, skipped)`.
pub fn train_step(
    net: &mut Network,
    data: &Dataset,
    indices: &[usize],
    adam: &mut AdamState,
    lr: f64,
) -> Result<(f64, usize, usize)> {
    let mut batch = batch_gradients(net, data, indices)?;
    if batch.n_ok > 0 {
        batch.grads.scale(1.0 / batch.n_ok as f64);
        frobenius_normalize(&mut batch.grads);
        adam_step(net, &batch.grads, adam, lr);
    }
    let mean_loss = if batch.n_ok > 0 {
        batch.loss_sum / batch.n_ok as f64
    } else {
        f64::NAN
    };
    Ok((mean_loss, batch.skipped, batch.clipped))
}

/// One full epoch with seeded shuffling. Returns the mean loss, the
/// skipped-sample count and how often the posterior clip fired.
pub fn train_epoch(
    net: &mut Network,
    data: &Dataset,
    batch_size: usize,
    lr: f64,
    rng: &mut ChaCha8Rng,
    adam: &mut AdamState,
) -> Result<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut loss_sum = 0.0;
    let mut n_batches = 0;
    let mut skipped = 0;
    let mut clipped = 0;
    for batch in order.chunks(batch_size) {
        let (loss, skip, clip) = train_step(net, data, batch, adam, lr)?;
        if loss.is_finite() {
            loss_sum += loss;
            n_batches += 1;
        }
        skipped += skip;
        clipped += clip;
    }
    Ok((
        if n_batches > 0 {
            loss_sum / n_batches as f64
        } else {
            f64::NAN
        },
        skipped,
        clipped,
    ))
}

/// Evaluation result on a split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    pub mean_loss: f64,
    /// Samples that could not be evaluated; they count as wrong.
    pub skipped: usize,
}

/// Top-1 accuracy; `max_frames` restricts evaluation to each sample's
/// first k frames.
pub fn evaluate(net: &Network, data: &Dataset, max_frames: Option<usize>) -> Result<EvalResult> {
    if let Some(k) = max_frames {
        if k == 0 {
            return Err(DennError::Config("need at least one frame".into()));
        }
    }
    let cache = net.build_cache();
    let indices: Vec<usize> = (0..data.len()).collect();
    let partials: Vec<Result<(usize, f64, usize, usize)>> = indices
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut correct = 0;
            let mut loss_sum = 0.0;
            let mut n_ok = 0;
            let mut skipped = 0;
            for &i in chunk {
                let mut frames = data.samples[i].times();
                if let Some(k) = max_frames {
                    frames.truncate(k);
                }
                let result = net
                    .forward(&frames, &cache)
                    .and_then(|(outputs, _)| cross_entropy(&outputs, data.labels[i] as usize));
                match result {
                    Ok(loss) => {
                        let pred = loss
                            .posterior
                            .pi
                            .iter()
                            .enumerate()
                            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                            .map(|(c, _)| c)
                            .unwrap_or(usize::MAX);
                        if pred == data.labels[i] as usize {
                            correct += 1;
                        }
                        loss_sum += loss.loss;
                        n_ok += 1;
                    }
                    Err(DennError::DegenerateLayer(_)) | Err(DennError::DegeneratePosterior) => {
                        skipped += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok((correct, loss_sum, n_ok, skipped))
        })
        .collect();
    let mut correct = 0;
    let mut loss_sum = 0.0;
    let mut n_ok = 0;
    let mut skipped = 0;
    for p in partials {
        let (c, l, n, s) = p?;
        correct += c;
        loss_sum += l;
        n_ok += n;
        skipped += s;
    }
    Ok(EvalResult {
        accuracy: correct as f64 / data.len().max(1) as f64,
        mean_loss: if n_ok > 0 {
            loss_sum / n_ok as f64
        } else {
            f64::NAN
        },
        skipped,
    })
}

/// Outcome of a full training run.
pub struct TrainReport {
    pub metrics: Vec<EpochMetrics>,
    pub best_accuracy: f64,
    pub best_epoch: usize,
    /// Parameters of the best-accuracy epoch, with the optimizer and RNG
    /// state captured at the same point for exact resumption.
    pub best_net: Network,
    pub best_adam: AdamState,
    pub best_rng_word_pos: u128,
    pub final_rng_word_pos: u128,
}

/// Train for the configured epochs, evaluating after each; keeps the
/// best-accuracy parameters. `stop_at` ends training early once the test
/// accuracy reaches the target.
pub fn train(
    net: &mut Network,
    train_data: &Dataset,
    test_data: &Dataset,
    cfg: &TrainingConfig,
    stop_at: Option<f64>,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(net);
    let mut metrics = Vec::new();
    let mut best_accuracy = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_net = net.clone();
    let mut best_adam = adam.clone();
    let mut best_rng_word_pos = rng.get_word_pos();
    for epoch in 0..cfg.epochs {
        let lr = cfg.scheduler.rate(cfg.learning_rate, epoch, cfg.epochs);
        let (train_loss, skipped, clipped) =
            train_epoch(net, train_data, cfg.batch_size, lr, &mut rng, &mut adam)?;
        if clipped > 0 {
            eprintln!("warning: epoch {epoch}: posterior clipped at the floor {clipped} time(s)");
        }
        let train_row = EpochMetrics {
            epoch,
            split: "train",
            loss: train_loss,
            accuracy: f64::NAN,
            skipped_samples: skipped,
        };
        on_epoch(&train_row);
        metrics.push(train_row);

        let eval = evaluate(net, test_data, None)?;
        let test_row = EpochMetrics {
            epoch,
            split: "test",
            loss: eval.mean_loss,
            accuracy: eval.accuracy,
            skipped_samples: eval.skipped,
        };
        on_epoch(&test_row);
        metrics.push(test_row);

        if eval.accuracy > best_accuracy {
            best_accuracy = eval.accuracy;
            best_epoch = epoch;
            best_net = net.clone();
            best_adam = adam.clone();
            best_rng_word_pos = rng.get_word_pos();
        }
        if let Some(target) = stop_at {
            if eval.accuracy >= target {
                break;
            }
        }
    }
    Ok(TrainReport {
        metrics,
        best_accuracy,
        best_epoch,
        best_net,
        best_adam,
        best_rng_word_pos,
        final_rng_word_pos: rng.get_word_pos(),
    })
}
