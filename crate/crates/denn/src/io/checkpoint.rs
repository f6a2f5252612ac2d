//! Checkpoints: every parameter tensor, the optimizer moments, the RNG
//! position and the configuration hash, in a flat named-tensor
//! container.
//!
//! Layout (little-endian): magic `DENN`, version, tensor count, then per
//! tensor `(name_len: u32, name, rank: u32, dims: u64×rank, payload:
//! f64×∏dims)`. Everything — including metadata like the RNG position —
//! is stored as f64 tensors of exactly-representable integers, so a
//! save/load cycle is bit-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{DennError, Result};
use crate::network::Network;
use crate::optim::AdamState;

pub const MAGIC: &[u8; 4] = b"DENN";
pub const VERSION: u32 = 1;

/// A named tensor: dims plus flat payload.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub dims: Vec<u64>,
    pub values: Vec<f64>,
}

/// In-memory checkpoint content.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    pub tensors: BTreeMap<String, NamedTensor>,
}

impl Checkpoint {
    /// Capture the network, optimizer state, RNG position and config
    /// hash.
    pub fn capture(
        net: &Network,
        adam: Option<&AdamState>,
        rng_seed: u64,
        rng_word_pos: u128,
        config_hash: u64,
    ) -> Self {
        let mut tensors = BTreeMap::new();
        for (name, _, values) in net.param_tensors() {
            tensors.insert(
                name,
                NamedTensor {
                    dims: vec![values.len() as u64],
                    values: values.to_vec(),
                },
            );
        }
        if let Some(state) = adam {
            for ((name, _, _), (m, v)) in net.param_tensors().iter().zip(&state.moments) {
                tensors.insert(
                    format!("adam.{name}.m"),
                    NamedTensor {
                        dims: vec![m.len() as u64],
                        values: m.clone(),
                    },
                );
                tensors.insert(
                    format!("adam.{name}.v"),
                    NamedTensor {
                        dims: vec![v.len() as u64],
                        values: v.clone(),
                    },
                );
            }
            tensors.insert(
                "meta.adam_step".into(),
                NamedTensor {
                    dims: vec![1],
                    values: vec![state.step as f64],
                },
            );
        }
        tensors.insert(
            "meta.rng".into(),
            NamedTensor {
                dims: vec![6],
                values: vec![
                    (rng_seed >> 32) as f64,
                    (rng_seed & 0xffff_ffff) as f64,
                    ((rng_word_pos >> 96) & 0xffff_ffff) as f64,
                    ((rng_word_pos >> 64) & 0xffff_ffff) as f64,
                    ((rng_word_pos >> 32) & 0xffff_ffff) as f64,
                    (rng_word_pos & 0xffff_ffff) as f64,
                ],
            },
        );
        tensors.insert(
            "meta.config_hash".into(),
            NamedTensor {
                dims: vec![2],
                values: vec![
                    (config_hash >> 32) as f64,
                    (config_hash & 0xffff_ffff) as f64,
                ],
            },
        );
        Checkpoint { tensors }
    }

    pub fn config_hash(&self) -> Option<u64> {
        let t = self.tensors.get("meta.config_hash")?;
        Some((t.values[0] as u64) << 32 | t.values[1] as u64)
    }

    pub fn rng_state(&self) -> Option<(u64, u128)> {
        let t = self.tensors.get("meta.rng")?;
        let seed = (t.values[0] as u64) << 32 | t.values[1] as u64;
        let pos = (t.values[2] as u128) << 96
            | (t.values[3] as u128) << 64
            | (t.values[4] as u128) << 32
            | t.values[5] as u128;
        Some((seed, pos))
    }

    /// Write parameters into a freshly built network of the same
    /// architecture.
    pub fn restore_params(&self, net: &mut Network) -> Result<()> {
        for (name, _, values) in net.param_tensors_mut() {
            let t = self
                .tensors
                .get(&name)
                .ok_or_else(|| DennError::CheckpointMismatch(format!("tensor '{name}' missing")))?;
            if t.values.len() != values.len() {
                return Err(DennError::CheckpointMismatch(format!(
                    "tensor '{name}' has {} values, network expects {}",
                    t.values.len(),
                    values.len()
                )));
            }
            values.copy_from_slice(&t.values);
        }
        Ok(())
    }

    /// Restore Adam moments (if the checkpoint carries them).
    pub fn restore_adam(&self, net: &Network) -> Result<Option<AdamState>> {
        let Some(step) = self.tensors.get("meta.adam_step") else {
            return Ok(None);
        };
        let mut moments = Vec::new();
        for (name, _, values) in net.param_tensors() {
            let m = self
                .tensors
                .get(&format!("adam.{name}.m"))
                .ok_or_else(|| DennError::CheckpointMismatch(format!("adam.{name}.m missing")))?;
            let v = self
                .tensors
                .get(&format!("adam.{name}.v"))
                .ok_or_else(|| DennError::CheckpointMismatch(format!("adam.{name}.v missing")))?;
            if m.values.len() != values.len() || v.values.len() != values.len() {
                return Err(DennError::CheckpointMismatch(format!(
                    "adam moments for '{name}' have the wrong size"
                )));
            }
            moments.push((m.values.clone(), v.values.clone()));
        }
        Ok(Some(AdamState {
            step: step.values[0] as u64,
            moments,
        }))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for d in &t.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
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
        if take(&mut off, 4)? != MAGIC {
            return Err(DennError::Parse {
                path: p.clone(),
                offset: 0,
                message: "missing DENN magic".into(),
            });
        }
        let ver = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
        if ver != VERSION {
            return Err(DennError::Parse {
                path: p.clone(),
                offset: 4,
                message: format!("unsupported version {ver}"),
            });
        }
        let count = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(&mut off, name_len)?.to_vec()).map_err(|_| {
                DennError::Parse {
                    path: p.clone(),
                    offset: off as u64,
                    message: "tensor name is not UTF-8".into(),
                }
            })?;
            let rank = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()));
            }
            let len: u64 = dims.iter().product();
            let raw = take(&mut off, len as usize * 8)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.insert(name, NamedTensor { dims, values });
        }
        Ok(Checkpoint { tensors })
    }
}
