//! Run configuration: dataset location, architecture, preprocessing and
//! training knobs, with strict JSON parsing and the per-dataset presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DennError, Result};
use crate::kernel::KernelSpec;
use crate::network::{parse_architecture, InputShape, NetworkSpec};
use crate::optim::Scheduler;
use crate::standardize::RegimeConfig;
use crate::train::TrainingConfig;

/// How raw files are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// IDX image + label pairs (static images).
    IdxImage,
    /// Directories of 5-byte binary event files, one subdirectory per
    /// class.
    NmnistBinary,
    /// Directories of canonical `DEVT` event files, one subdirectory per
    /// class.
    CanonicalEvent,
    /// A preprocessed `DFRM` frame cache.
    FrameCache,
}

/// Static-image encoding variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    /// Standardize all pixels; no silence.
    #[default]
    Intensity,
    /// Zero-intensity pixels never fire; statistics over lit pixels.
    IntensityZeroSilent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: DataFormat,
}

/// Event-preprocessing knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Trigger fraction `r`: a frame is cut when more than `2rN` cells
    /// are active.
    pub r: f64,
    /// Opaque per-dataset constant carried with the run; stored but not
    /// interpreted by the pipeline.
    pub delta: u32,
    /// Memory length ν.
    pub nu: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            r: 0.05,
            delta: 1,
            nu: 0,
        }
    }
}

/// Everything a run needs. Unknown JSON keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    /// Compact architecture string, e.g. `"784-100-10"` or
    /// `"8c5s2-16c3s1-p2s2-32c3s1-32c3s1-p2s2-10"`.
    pub arch: String,
    /// Input shape: `n` for flat inputs, `[c, h, w]` for maps.
    pub input: InputShape,
    pub kernel: KernelSpec,
    /// Survival quantile q.
    pub q: f64,
    pub encoding: EncodingKind,
    pub preprocess: PreprocessConfig,
    pub training: TrainingConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(DennError::Config(format!(
                "q must lie in (0,1], got {}",
                self.q
            )));
        }
        self.training.validate()?;
        if !(self.preprocess.r > 0.0 && self.preprocess.r < 1.0) {
            return Err(DennError::Config(format!(
                "preprocess.r must lie in (0,1), got {}",
                self.preprocess.r
            )));
        }
        parse_architecture(&self.arch)?;
        Ok(())
    }

    pub fn network_spec(&self) -> Result<NetworkSpec> {
        Ok(NetworkSpec {
            input: self.input,
            layers: parse_architecture(&self.arch)?,
            kernel: self.kernel,
            regime: RegimeConfig::new(self.q)?,
            nu: self.preprocess.nu,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(s).map_err(|e| DennError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Hash of the model-defining fields (architecture, kernel, regime,
    /// memory and encoding — not epochs or rates), used to pair
    /// checkpoints with compatible evaluation configs.
    pub fn model_hash(&self) -> u64 {
        let sig = format!(
            "{}|{:?}|{:?}|{}|{}|{:?}|{}",
            self.arch,
            self.input,
            self.kernel,
            self.q,
            self.preprocess.nu,
            self.encoding,
            self.preprocess.r,
        );
        fnv1a(sig.as_bytes())
    }
}

/// FNV-1a, stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Ready-made per-dataset presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Mnist,
    Cifar10,
    Nmnist,
    DvsGesture,
    Gsc,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "mnist" => Ok(Preset::Mnist),
            "cifar10" | "cifar-10" => Ok(Preset::Cifar10),
            "nmnist" | "n-mnist" => Ok(Preset::Nmnist),
            "dvsgesture" | "dvs-gesture" => Ok(Preset::DvsGesture),
            "gsc" => Ok(Preset::Gsc),
            other => Err(DennError::Config(format!("unknown preset '{other}'"))),
        }
    }

    /// The preset's run configuration, pointing at `data_path`.
    pub fn config(&self, data_path: &Path) -> RunConfig {
        let d = |format| DatasetConfig {
            path: data_path.to_path_buf(),
            format,
        };
        match self {
            Preset::Mnist => RunConfig {
                dataset: d(DataFormat::IdxImage),
                // the full stack reads 784-100-10; the input size lives in
                // `input` and the arch string lists the layers
                arch: "100-10".into(),
                input: InputShape::Flat(784),
                kernel: KernelSpec::Exponential,
                q: 1.0,
                encoding: EncodingKind::IntensityZeroSilent,
                preprocess: PreprocessConfig {
                    r: 0.05,
                    delta: 1,
                    nu: 0,
                },
                training: TrainingConfig {
                    learning_rate: 0.001,
                    batch_size: 4096,
                    epochs: 50,
                    scheduler: Scheduler::None,
                    seed: 22_756_400,
                },
                output_dir: PathBuf::from("runs/mnist"),
            },
            Preset::Cifar10 => RunConfig {
                dataset: d(DataFormat::IdxImage),
                arch: "64c3s1p1-64c3s1p1-p2s2-128c3s1p1-128c3s1p1-p2s2-\
                       256c3s1p1-256c3s1p1-256c3s1p1-p2s2-1024-10"
                    .into(),
                input: InputShape::Map(3, 32, 32),
                kernel: KernelSpec::Exponential,
                q: 1.0,
                encoding: EncodingKind::Intensity,
                preprocess: PreprocessConfig {
                    r: 0.05,
                    delta: 1,
                    nu: 0,
                },
                training: TrainingConfig {
                    learning_rate: 0.001,
                    batch_size: 512,
                    epochs: 50,
                    scheduler: Scheduler::None,
                    seed: 76_446_569,
                },
                output_dir: PathBuf::from("runs/cifar10"),
            },
            Preset::Nmnist => RunConfig {
                dataset: d(DataFormat::NmnistBinary),
                arch: "8c5s2-16c3s1-p2s2-32c3s1-32c3s1-p2s2-10".into(),
                input: InputShape::Map(2, 34, 34),
                kernel: KernelSpec::Exponential,
                q: 0.5,
                encoding: EncodingKind::Intensity,
                preprocess: PreprocessConfig {
                    r: 0.05,
                    delta: 4,
                    nu: 0,
                },
                training: TrainingConfig {
                    learning_rate: 0.001,
                    batch_size: 16,
                    epochs: 10,
                    scheduler: Scheduler::None,
                    seed: 94_240_977,
                },
                output_dir: PathBuf::from("runs/nmnist"),
            },
            Preset::DvsGesture => RunConfig {
                dataset: d(DataFormat::CanonicalEvent),
                arch: "8c7s3-16c5s2-p2s2-32c3s1-32c3s1-p2s2-11".into(),
                input: InputShape::Map(2, 128, 128),
                kernel: KernelSpec::Exponential,
                q: 0.5,
                encoding: EncodingKind::Intensity,
                preprocess: PreprocessConfig {
                    r: 0.05,
                    delta: 4,
                    nu: 0,
                },
                training: TrainingConfig {
                    learning_rate: 0.001,
                    batch_size: 16,
                    epochs: 10,
                    scheduler: Scheduler::None,
                    seed: 98_074_194,
                },
                output_dir: PathBuf::from("runs/dvsgesture"),
            },
            Preset::Gsc => RunConfig {
                dataset: d(DataFormat::CanonicalEvent),
                arch: "256-256-256-35".into(),
                input: InputShape::Flat(60),
                kernel: KernelSpec::Exponential,
                q: 1.0,
                encoding: EncodingKind::Intensity,
                preprocess: PreprocessConfig {
                    r: 0.1,
                    delta: 1,
                    nu: 25,
                },
                training: TrainingConfig {
                    learning_rate: 0.001,
                    batch_size: 700,
                    epochs: 50,
                    scheduler: Scheduler::CosineAnnealing,
                    seed: 36_887_311,
                },
                output_dir: PathBuf::from("runs/gsc"),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_reference_settings() {
        let m = Preset::Mnist.config(Path::new("data"));
        assert_eq!(m.arch, "100-10");
        assert_eq!(m.input, InputShape::Flat(784));
        assert_eq!(m.training.batch_size, 4096);
        assert_eq!(m.training.learning_rate, 0.001);
        assert_eq!(m.training.seed, 22_756_400);
        assert_eq!(m.encoding, EncodingKind::IntensityZeroSilent);

        let n = Preset::Nmnist.config(Path::new("data"));
        assert_eq!(n.q, 0.5);
        assert_eq!(n.preprocess.r, 0.05);
        assert_eq!(n.preprocess.delta, 4);
        assert_eq!(n.training.batch_size, 16);
        assert_eq!(n.training.seed, 94_240_977);

        let g = Preset::Gsc.config(Path::new("data"));
        assert_eq!(g.training.scheduler, Scheduler::CosineAnnealing);
        assert_eq!(g.preprocess.nu, 25);
        assert_eq!(g.preprocess.r, 0.1);
        assert_eq!(g.training.batch_size, 700);
        assert_eq!(g.input, InputShape::Flat(60));
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = r#"{
            "dataset": {"path": "x", "format": "idx_image"},
            "arch": "4-2",
            "input": 4,
            "kernel": {"kind": "exponential"},
            "q": 1.0,
            "encoding": "intensity",
            "preprocess": {"r": 0.05, "delta": 1, "nu": 0},
            "training": {"learning_rate": 0.001, "batch_size": 8, "epochs": 1,
                         "scheduler": "none", "seed": 1},
            "output_dir": "out",
            "bogus": 7
        }"#;
        assert!(RunConfig::from_json(json).is_err());
        let fixed = json.replace(",\n            \"bogus\": 7", "");
        let cfg = RunConfig::from_json(&fixed).unwrap();
        assert_eq!(cfg.arch, "4-2");
    }

    #[test]
    fn model_hash_tracks_model_fields_only() {
        let mut a = Preset::Mnist.config(Path::new("data"));
        let mut b = a.clone();
        b.training.epochs = 3;
        b.training.batch_size = 7;
        assert_eq!(a.model_hash(), b.model_hash());
        a.q = 0.5;
        assert_ne!(a.model_hash(), b.model_hash());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = Preset::Mnist.config(Path::new("data"));
        cfg.q = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = Preset::Mnist.config(Path::new("data"));
        cfg.training.learning_rate = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = Preset::Mnist.config(Path::new("data"));
        cfg.arch = "78a4-10".into();
        assert!(cfg.validate().is_err());
    }
}
