//! Binary file formats: dataset readers, the frame cache, checkpoints.

pub mod checkpoint;
pub mod devt;
pub mod frame_cache;
pub mod idx;
pub mod nmnist;

use std::io::Read;

use crate::error::{DennError, Result};

/// Read exactly `n` bytes, reporting the offset on truncation.
pub(crate) fn read_bytes<R: Read>(r: &mut R, n: usize, path: &str, offset: u64) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|_| DennError::Parse {
        path: path.to_string(),
        offset,
        message: format!("truncated: expected {n} more bytes"),
    })?;
    Ok(buf)
}

pub(crate) fn read_u32_be<R: Read>(r: &mut R, path: &str, offset: u64) -> Result<u32> {
    let b = read_bytes(r, 4, path, offset)?;
    Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}
