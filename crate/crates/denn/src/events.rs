//! Event-stream preprocessing: the event2time algorithm.
//!
//! Event cameras and spike encoders emit streams of `(t, p, x, y)`
//! events. To present them to a frame-based network, events are
//! accumulated per *cell* — one cell per pixel-polarity pair, `2N` cells
//! for `N` pixels — and a frame is cut the moment more than `2rN` cells
//! hold at least one event. Each active cell then contributes
//!
//! ```text
//! t_i = (max L_i - min L_i) / #L_i
//! ```
//!
//! where `L_i` is the cell's timestamp list: a strongly active cell
//! (many events in the span) becomes a *fast* cell with a small time.
//! The frame is standardized over its active cells, inactive cells stay
//! silent, all lists are cleared, and accumulation restarts on the next
//! event.
//!
//! Only the span, the count and the first timestamp of each list matter,
//! so the accumulator stores those triples instead of whole lists; the
//! test suite holds the streaming implementation against a brute-force
//! list-keeping oracle.

use crate::error::{DennError, Result};
use crate::standardize::{standardize, StandardizedTimes, SILENT};

/// One polarity-change event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Timestamp in microseconds; non-decreasing within a sample.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    /// Polarity, `+1` or `-1`.
    pub p: i8,
}

/// One frame produced by event2time, before standardization: the raw
/// per-cell times with inactive cells silent.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    /// `(max - min)/count` per cell; `+∞` where the cell never fired.
    pub times: Vec<f64>,
    /// Wall-clock span of the accumulation window (µs).
    pub span: u64,
    /// Set on the final partial frame cut at end of stream.
    pub partial: bool,
}

/// A standardized input frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub times: StandardizedTimes,
    /// Wall-clock span of the accumulation window (µs).
    pub span: u64,
    pub partial: bool,
}

/// A sample ready for the network: `M` standardized frames.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn times(&self) -> Vec<StandardizedTimes> {
        self.frames.iter().map(|f| f.times.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    first: u64,
    last: u64,
    count: u32,
}

/// Streaming event2time accumulator for one sample.
#[derive(Debug, Clone)]
pub struct EventAccumulator {
    width: usize,
    height: usize,
    /// Trigger fraction `r ∈ (0, 1)`.
    pub r: f64,
    cells: Vec<Cell>,
    active: usize,
    /// Emission threshold: a frame is cut when `active > 2·r·N`.
    threshold: f64,
    window_start: Option<u64>,
    last_t: u64,
    dropped_degenerate: usize,
}

impl EventAccumulator {
    /// `width × height` pixels, two polarity cells per pixel.
    pub fn new(width: usize, height: usize, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(DennError::Config(format!("r must lie in (0,1), got {r}")));
        }
        let n = width * height;
        if n == 0 {
            return Err(DennError::Config("empty pixel grid".into()));
        }
        Ok(EventAccumulator {
            width,
            height,
            r,
            cells: vec![Cell::default(); 2 * n],
            active: 0,
            threshold: 2.0 * r * n as f64,
            window_start: None,
            last_t: 0,
            dropped_degenerate: 0,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Cell index of an event: polarity picks the half, then row-major
    /// pixel order.
    pub fn cell_index(&self, e: &Event) -> usize {
        let pol = usize::from(e.p > 0);
        pol * self.width * self.height + e.y as usize * self.width + e.x as usize
    }

    /// Feed one event; returns a frame when this event tips the active
    /// count over the threshold.
    pub fn push(&mut self, e: Event) -> Result<Option<RawFrame>> {
        if e.t < self.last_t {
            return Err(DennError::Parse {
                path: "<event stream>".into(),
                offset: 0,
                message: format!("timestamp {} after {} is out of order", e.t, self.last_t),
            });
        }
        self.last_t = e.t;
        if e.x as usize >= self.width || e.y as usize >= self.height {
            return Err(DennError::Parse {
                path: "<event stream>".into(),
                offset: 0,
                message: format!(
                    "pixel ({}, {}) outside {}×{}",
                    e.x, e.y, self.width, self.height
                ),
            });
        }
        let idx = self.cell_index(&e);
        self.window_start.get_or_insert(e.t);
        let cell = &mut self.cells[idx];
        if cell.count == 0 {
            cell.first = e.t;
            self.active += 1;
        }
        cell.last = e.t;
        cell.count += 1;
        if (self.active as f64) > self.threshold {
            return Ok(Some(self.cut_frame(false)));
        }
        Ok(None)
    }

    /// End of stream: emit a final partial frame if at least two cells
    /// are active (fewer cannot be standardized).
    pub fn finalize(&mut self) -> Option<RawFrame> {
        if self.active >= 2 {
            Some(self.cut_frame(true))
        } else {
            None
        }
    }

    /// Frames dropped because their active cells had zero spread.
    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    fn cut_frame(&mut self, partial: bool) -> RawFrame {
        let times = self
            .cells
            .iter()
            .map(|c| {
                if c.count == 0 {
                    SILENT
                } else {
                    (c.last - c.first) as f64 / c.count as f64
                }
            })
            .collect();
        let span = self.last_t - self.window_start.unwrap_or(self.last_t);
        for c in &mut self.cells {
            *c = Cell::default();
        }
        self.active = 0;
        self.window_start = None;
        RawFrame {
            times,
            span,
            partial,
        }
    }

    /// Standardize a raw frame; `None` when the active cells have no
    /// spread (the frame is dropped and counted).
    pub fn standardize_frame(&mut self, raw: RawFrame) -> Option<Frame> {
        match standardize(&raw.times) {
            Ok(s) => Some(Frame {
                times: s.times,
                span: raw.span,
                partial: raw.partial,
            }),
            Err(_) => {
                self.dropped_degenerate += 1;
                None
            }
        }
    }

    /// Run a whole event stream through the accumulator.
    pub fn process_all(&mut self, events: &[Event]) -> Result<FrameSequence> {
        let mut frames = Vec::new();
        for &e in events {
            if let Some(raw) = self.push(e)? {
                if let Some(f) = self.standardize_frame(raw) {
                    frames.push(f);
                }
            }
        }
        if let Some(raw) = self.finalize() {
            if let Some(f) = self.standardize_frame(raw) {
                frames.push(f);
            }
        }
        Ok(FrameSequence { frames })
    }
}
