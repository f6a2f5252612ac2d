//! Preprocessed-frame cache.
//!
//! event2time is deterministic, so its output is computed once and
//! reused across epochs. Layout (all little-endian):
//!
//! ```text
//! "DFRM"  version:u32  samples:u32  frame_len:u32
//! per sample:
//!   label:u32  frame_count:u32
//!   per frame:
//!     len:u32 (= frame_len)  values:f32×len  silent_mask:⌈len/8⌉ bytes
//! ```
//!
//! Silent entries store `+∞` and a set mask bit; the mask is
//! authoritative on load. Values are standardized before caching.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{DennError, Result};
use crate::events::{Frame, FrameSequence};
use crate::standardize::{StandardizedTimes, SILENT};

pub const MAGIC: &[u8; 4] = b"DFRM";
pub const VERSION: u32 = 1;

/// Write a whole dataset of frame sequences plus labels.
pub fn write_cache(path: &Path, samples: &[FrameSequence], labels: &[u8]) -> Result<()> {
    if samples.len() != labels.len() {
        return Err(DennError::ShapeMismatch(format!(
            "{} samples but {} labels",
            samples.len(),
            labels.len()
        )));
    }
    let frame_len = samples
        .iter()
        .flat_map(|s| s.frames.first())
        .map(|f| f.times.len())
        .next()
        .unwrap_or(0);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(samples.len() as u32).to_le_bytes());
    out.extend_from_slice(&(frame_len as u32).to_le_bytes());
    for (seq, &label) in samples.iter().zip(labels) {
        out.extend_from_slice(&(label as u32).to_le_bytes());
        out.extend_from_slice(&(seq.frames.len() as u32).to_le_bytes());
        for frame in &seq.frames {
            if frame.times.len() != frame_len {
                return Err(DennError::ShapeMismatch(format!(
                    "frame length {} differs from {}",
                    frame.times.len(),
                    frame_len
                )));
            }
            out.extend_from_slice(&(frame_len as u32).to_le_bytes());
            for &v in &frame.times.values {
                let f = if v == SILENT { f32::INFINITY } else { v as f32 };
                out.extend_from_slice(&f.to_le_bytes());
            }
            let mut mask = vec![0u8; frame_len.div_ceil(8)];
            for (i, &v) in frame.times.values.iter().enumerate() {
                if v == SILENT {
                    mask[i / 8] |= 1 << (i % 8);
                }
            }
            out.extend_from_slice(&mask);
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

/// A loaded cache: sequences plus labels.
pub struct CachedDataset {
    pub samples: Vec<FrameSequence>,
    pub labels: Vec<u8>,
    pub frame_len: usize,
}

pub fn read_cache(path: &Path) -> Result<CachedDataset> {
    let p = path.display().to_string();
    let bytes = fs::read(path)?;
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        if *off + n > bytes.len() {
            return Err(DennError::Parse {
                path: p.clone(),
                offset: *off as u64,
                message: format!("truncated: wanted {n} bytes"),
            });
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };
    let u32_at = |off: &mut usize| -> Result<u32> {
        let b = take(off, 4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    };

    if take(&mut off, 4)? != MAGIC {
        return Err(DennError::Parse {
            path: p.clone(),
            offset: 0,
            message: "missing DFRM magic".into(),
        });
    }
    let version = u32_at(&mut off)?;
    if version != VERSION {
        return Err(DennError::Parse {
            path: p.clone(),
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let n_samples = u32_at(&mut off)? as usize;
    let frame_len = u32_at(&mut off)? as usize;
    let mut samples = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let label = u32_at(&mut off)?;
        if label > 255 {
            return Err(DennError::Parse {
                path: p.clone(),
                offset: off as u64,
                message: format!("label {label} out of range"),
            });
        }
        labels.push(label as u8);
        let m = u32_at(&mut off)? as usize;
        let mut frames = Vec::with_capacity(m);
        for _ in 0..m {
            let len = u32_at(&mut off)? as usize;
            if len != frame_len {
                return Err(DennError::Parse {
                    path: p.clone(),
                    offset: off as u64,
                    message: format!("frame length {len} differs from header {frame_len}"),
                });
            }
            let raw = take(&mut off, 4 * len)?;
            let mut values: Vec<f64> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            let mask = take(&mut off, len.div_ceil(8))?;
            for (i, v) in values.iter_mut().enumerate() {
                if mask[i / 8] & (1 << (i % 8)) != 0 {
                    *v = SILENT;
                }
            }
            frames.push(Frame {
                times: StandardizedTimes::new(values),
                span: 0,
                partial: false,
            });
        }
        samples.push(FrameSequence { frames });
    }
    Ok(CachedDataset {
        samples,
        labels,
        frame_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(vals: Vec<Vec<f64>>) -> FrameSequence {
        FrameSequence {
            frames: vals
                .into_iter()
                .map(|v| Frame {
                    times: StandardizedTimes::new(v),
                    span: 0,
                    partial: false,
                })
                .collect(),
        }
    }

    #[test]
    fn roundtrip_preserves_silence_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.dfrm");
        let samples = vec![
            seq(vec![
                vec![0.5, SILENT, -1.25, 2.0],
                vec![SILENT, SILENT, 1.0, 0.0],
            ]),
            seq(vec![vec![1.0, 2.0, 3.0, SILENT]]),
        ];
        write_cache(&path, &samples, &[3, 9]).unwrap();
        let loaded = read_cache(&path).unwrap();
        assert_eq!(loaded.labels, vec![3, 9]);
        assert_eq!(loaded.frame_len, 4);
        assert_eq!(loaded.samples.len(), 2);
        // f32 representable values survive exactly
        assert_eq!(
            loaded.samples[0].frames[0].times.values,
            vec![0.5, SILENT, -1.25, 2.0]
        );
        assert_eq!(loaded.samples[0].frames[1].times.values[0], SILENT);
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.dfrm");
        let b = dir.path().join("b.dfrm");
        let samples = vec![seq(vec![vec![0.1, 0.2, SILENT]])];
        write_cache(&a, &samples, &[1]).unwrap();
        write_cache(&b, &samples, &[1]).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn corrupt_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.dfrm");
        fs::write(&path, b"DFRX\x01\x00\x00\x00").unwrap();
        assert!(read_cache(&path).is_err());
    }
}
