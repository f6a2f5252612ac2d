//! Synthetic event data: a saccade renderer that turns static images
//! into event streams (for pipeline tests and desk-scale event-camera
//! experiments when the recorded datasets are not on disk), plus small
//! generators for property tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::events::Event;

/// Saccade rendering parameters.
#[derive(Debug, Clone, Copy)]
pub struct SaccadeParams {
    /// Output field edge (the image moves inside field − image margin).
    pub field: usize,
    /// Wall-clock step between positions, µs.
    pub step_us: u64,
    /// Intensity change that triggers an event.
    pub threshold: f64,
}

impl Default for SaccadeParams {
    fn default() -> Self {
        SaccadeParams {
            field: 34,
            step_us: 4000,
            threshold: 0.25,
        }
    }
}

fn render(image: &[f64], rows: usize, cols: usize, field: usize, ox: usize, oy: usize) -> Vec<f64> {
    let mut out = vec![0.0; field * field];
    for y in 0..rows {
        for x in 0..cols {
            out[(y + oy) * field + (x + ox)] = image[y * cols + x];
        }
    }
    out
}

/// Move the image along a three-leg saccade path and emit polarity
/// events where the rendered intensity crosses the threshold, exactly
/// like a change detector watching the moving digit.
pub fn saccade_events(
    image: &[f64],
    rows: usize,
    cols: usize,
    params: &SaccadeParams,
    rng: &mut ChaCha8Rng,
) -> Vec<Event> {
    let margin = params.field - rows.max(cols);
    let corners = [
        (0usize, 0usize),
        (margin, margin / 2),
        (margin / 2, margin),
        (0, 0),
    ];
    // walk the corner path one unit step at a time
    let mut positions = vec![corners[0]];
    for pair in corners.windows(2) {
        let (mut x, mut y) = *positions.last().unwrap();
        let (tx, ty) = pair[1];
        while (x, y) != (tx, ty) {
            if x != tx {
                x = if tx > x { x + 1 } else { x - 1 };
            }
            if y != ty {
                y = if ty > y { y + 1 } else { y - 1 };
            }
            positions.push((x, y));
        }
    }

    let mut events = Vec::new();
    let mut prev = render(
        image,
        rows,
        cols,
        params.field,
        positions[0].0,
        positions[0].1,
    );
    for (step, &(ox, oy)) in positions.iter().enumerate().skip(1) {
        let now = render(image, rows, cols, params.field, ox, oy);
        let base = step as u64 * params.step_us;
        for (i, (&n, &p)) in now.iter().zip(&prev).enumerate() {
            let diff = n - p;
            if diff.abs() >= params.threshold {
                events.push(Event {
                    t: base + rng.gen_range(0..params.step_us / 2),
                    x: (i % params.field) as u16,
                    y: (i / params.field) as u16,
                    p: if diff > 0.0 { 1 } else { -1 },
                });
            }
        }
        prev = now;
    }
    events.sort_by_key(|e| e.t);
    events
}

/// Uniform random events on a grid, timestamps strictly increasing.
pub fn random_event_stream(
    n: usize,
    width: u16,
    height: u16,
    mean_gap_us: u64,
    rng: &mut ChaCha8Rng,
) -> Vec<Event> {
    let mut t = 0u64;
    (0..n)
        .map(|_| {
            t += rng.gen_range(1..=2 * mean_gap_us.max(1));
            Event {
                t,
                x: rng.gen_range(0..width),
                y: rng.gen_range(0..height),
                p: if rng.gen::<bool>() { 1 } else { -1 },
            }
        })
        .collect()
}

/// A two-class task distinguishable *only* by frame order: both classes
/// show the same two patterns, class 0 as (A, B) and class 1 as (B, A),
/// plus per-sample noise. Per-frame marginals are identical across
/// classes by construction, so any order-blind model sits at chance.
pub fn frame_order_task(
    cells: usize,
    n_per_class: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<Vec<f64>>>, Vec<u8>) {
    let pattern_a: Vec<f64> = (0..cells).map(|i| (i as f64 * 1.7).sin()).collect();
    let pattern_b: Vec<f64> = (0..cells).map(|i| (i as f64 * 1.7 + 2.3).cos()).collect();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * n_per_class {
        let class = (i % 2) as u8;
        let jitter = |p: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
            if noise <= 0.0 {
                return p.to_vec();
            }
            p.iter().map(|v| v + rng.gen_range(-noise..noise)).collect()
        };
        let (first, second) = if class == 0 {
            (jitter(&pattern_a, rng), jitter(&pattern_b, rng))
        } else {
            (jitter(&pattern_b, rng), jitter(&pattern_a, rng))
        };
        samples.push(vec![first, second]);
        labels.push(class);
    }
    (samples, labels)
}
