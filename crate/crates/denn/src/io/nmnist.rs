//! The 5-byte binary event record used by the event-camera digit
//! dataset distributions.
//!
//! Layout per record: `byte0 = x`, `byte1 = y`, `byte2 bit 7 = polarity`
//! (set ⇒ +1), and the remaining 23 bits — byte2's low seven bits, then
//! bytes 3–4 — are the timestamp in microseconds, big-endian within the
//! bit field.

use std::fs;
use std::path::Path;

use crate::error::{DennError, Result};
use crate::events::Event;

pub const RECORD_LEN: usize = 5;

/// Decode one 5-byte record.
#[inline]
pub fn decode_record(b: [u8; RECORD_LEN]) -> Event {
    let p = if b[2] & 0x80 != 0 { 1 } else { -1 };
    let t = ((b[2] & 0x7f) as u64) << 16 | (b[3] as u64) << 8 | b[4] as u64;
    Event {
        t,
        x: b[0] as u16,
        y: b[1] as u16,
        p,
    }
}

/// Encode an event back into the 5-byte layout (timestamps above 23 bits
/// do not fit and are rejected).
pub fn encode_record(e: &Event) -> Result<[u8; RECORD_LEN]> {
    if e.t >= 1 << 23 {
        return Err(DennError::Config(format!(
            "timestamp {} exceeds the 23-bit field",
            e.t
        )));
    }
    if e.x > 255 || e.y > 255 {
        return Err(DennError::Config(format!(
            "pixel ({}, {}) exceeds the 8-bit fields",
            e.x, e.y
        )));
    }
    let pol = if e.p > 0 { 0x80u8 } else { 0 };
    Ok([
        e.x as u8,
        e.y as u8,
        pol | ((e.t >> 16) as u8 & 0x7f),
        (e.t >> 8) as u8,
        e.t as u8,
    ])
}

/// Read a whole event file. The length must divide evenly into records.
pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let bytes = fs::read(path)?;
    decode_events(&bytes, &path.display().to_string())
}

pub fn decode_events(bytes: &[u8], path: &str) -> Result<Vec<Event>> {
    if !bytes.len().is_multiple_of(RECORD_LEN) {
        return Err(DennError::Parse {
            path: path.to_string(),
            offset: bytes.len() as u64,
            message: format!("length {} not divisible by {RECORD_LEN}", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(RECORD_LEN)
        .map(|c| decode_record([c[0], c[1], c[2], c[3], c[4]]))
        .collect())
}

/// Write events in the 5-byte layout.
pub fn write_events(path: &Path, events: &[Event]) -> Result<()> {
    let mut bytes = Vec::with_capacity(events.len() * RECORD_LEN);
    for e in events {
        bytes.extend_from_slice(&encode_record(e)?);
    }
    fs::write(path, bytes)?;
    Ok(())
}
