//! The canonical event container: magic `DEVT`, version, then fixed
//! 13-byte little-endian records `(t: u64 µs, x: u16, y: u16, p: i8)`.
//!
//! Used for audio events after external spike conversion and for any
//! event stream re-exported from other containers.

use std::fs;
use std::path::Path;

use crate::error::{DennError, Result};
use crate::events::Event;

pub const MAGIC: &[u8; 4] = b"DEVT";
pub const VERSION: u32 = 1;
pub const RECORD_LEN: usize = 13;

pub fn write_events(path: &Path, events: &[Event]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + events.len() * RECORD_LEN);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    for e in events {
        bytes.extend_from_slice(&e.t.to_le_bytes());
        bytes.extend_from_slice(&e.x.to_le_bytes());
        bytes.extend_from_slice(&e.y.to_le_bytes());
        bytes.push(e.p as u8);
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let bytes = fs::read(path)?;
    decode(&bytes, &path.display().to_string())
}

pub fn decode(bytes: &[u8], path: &str) -> Result<Vec<Event>> {
    if bytes.len() < 8 || &bytes[0..4] != MAGIC {
        return Err(DennError::Parse {
            path: path.to_string(),
            offset: 0,
            message: "missing DEVT magic".into(),
        });
    }
    let version = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    if version != VERSION {
        return Err(DennError::Parse {
            path: path.to_string(),
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let payload = &bytes[8..];
    if !payload.len().is_multiple_of(RECORD_LEN) {
        return Err(DennError::Parse {
            path: path.to_string(),
            offset: bytes.len() as u64,
            message: format!("payload {} not divisible by {RECORD_LEN}", payload.len()),
        });
    }
    let mut events = Vec::with_capacity(payload.len() / RECORD_LEN);
    for (i, c) in payload.chunks_exact(RECORD_LEN).enumerate() {
        let p = c[12] as i8;
        if p != 1 && p != -1 {
            return Err(DennError::Parse {
                path: path.to_string(),
                offset: (8 + i * RECORD_LEN) as u64,
                message: format!("polarity byte {p} is neither +1 nor -1"),
            });
        }
        events.push(Event {
            t: u64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]),
            x: u16::from_le_bytes([c[8], c[9]]),
            y: u16::from_le_bytes([c[10], c[11]]),
            p,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_payload_is_empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.devt");
        write_events(&path, &[]).unwrap();
        assert!(read_events(&path).unwrap().is_empty());
    }

    #[test]
    fn two_records_are_26_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two.devt");
        let events = vec![
            Event {
                t: 17,
                x: 3,
                y: 9,
                p: 1,
            },
            Event {
                t: 99_000_000,
                x: 0,
                y: 255,
                p: -1,
            },
        ];
        write_events(&path, &events).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 26);
        assert_eq!(read_events(&path).unwrap(), events);
    }

    #[test]
    fn bad_magic_and_version() {
        assert!(decode(b"XEVT\x01\x00\x00\x00", "x").is_err());
        assert!(decode(b"DEVT\x02\x00\x00\x00", "x").is_err());
        // ragged payload
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 20]);
        assert!(decode(&bytes, "x").is_err());
    }
}
