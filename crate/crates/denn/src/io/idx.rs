//! IDX image/label files (the classic big-endian digit-dataset format).

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use super::{read_bytes, read_u32_be};
use crate::error::{DennError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Images as intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

/// Parse an IDX image file (`magic 0x00000803`, big-endian dims, u8
/// payload scaled to `[0, 1]`).
pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let p = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_u32_be(&mut r, &p, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(DennError::Parse {
            path: p,
            offset: 0,
            message: format!("bad image magic {magic:#010x}"),
        });
    }
    let count = read_u32_be(&mut r, &p, 4)? as usize;
    let rows = read_u32_be(&mut r, &p, 8)? as usize;
    let cols = read_u32_be(&mut r, &p, 12)? as usize;
    let data = read_bytes(&mut r, count * rows * cols, &p, 16)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: data.into_iter().map(|b| b as f64 / 255.0).collect(),
    })
}

/// Parse an IDX label file (`magic 0x00000801`).
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let p = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_u32_be(&mut r, &p, 0)?;
    if magic != LABEL_MAGIC {
        return Err(DennError::Parse {
            path: p,
            offset: 0,
            message: format!("bad label magic {magic:#010x}"),
        });
    }
    let count = read_u32_be(&mut r, &p, 4)? as usize;
    read_bytes(&mut r, count, &p, 8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_images(path: &Path, count: u32, rows: u32, cols: u32, data: &[u8]) {
        let mut f = File::create(path).unwrap();
        f.write_all(&IMAGE_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&count.to_be_bytes()).unwrap();
        f.write_all(&rows.to_be_bytes()).unwrap();
        f.write_all(&cols.to_be_bytes()).unwrap();
        f.write_all(data).unwrap();
    }

    #[test]
    fn roundtrip_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        write_images(&img, 2, 2, 2, &[0, 255, 128, 64, 1, 2, 3, 4]);
        let images = read_idx_images(&img).unwrap();
        assert_eq!((images.count, images.rows, images.cols), (2, 2, 2));
        assert_eq!(images.image(0)[1], 1.0);
        assert!((images.image(0)[2] - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad");
        let mut f = File::create(&path).unwrap();
        f.write_all(&0x0000_0802u32.to_be_bytes()).unwrap();
        f.write_all(&[0; 12]).unwrap();
        assert!(matches!(
            read_idx_images(&path),
            Err(DennError::Parse { .. })
        ));
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc");
        write_images(&path, 10, 28, 28, &[0; 100]); // far too short
        let err = read_idx_images(&path).unwrap_err();
        assert!(matches!(err, DennError::Parse { .. }), "{err}");
    }

    #[test]
    fn labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lbl");
        let mut f = File::create(&path).unwrap();
        f.write_all(&LABEL_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&3u32.to_be_bytes()).unwrap();
        f.write_all(&[7, 0, 9]).unwrap();
        assert_eq!(read_idx_labels(&path).unwrap(), vec![7, 0, 9]);
    }
}
