//! Binary weights format.
//!
//! ```text
//! magic        4 bytes  "LFDN"
//! version      u32 LE
//! row_dim      u32 LE   (16)
//! slots        u32 LE   (16)
//! time_dim     u32 LE   (32)
//! cond_dim     u32 LE   (96)
//! hidden       u32 LE
//! context      u32 LE
//! timesteps    u32 LE
//! param_count  u64 LE
//! params       param_count × f64 LE, tensors in `TENSOR_NAMES` order, each row-major
//!              with weights stored fan_in × fan_out
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Architecture, DenoiserParams, TrainConfig, TENSOR_NAMES, TIME_DIM};
use crate::condition::{COND_DIM, VOCABULARY, VOCAB_VERSION};
use crate::diffusion::ScheduleConfig;
use crate::error::{Error, Result};
use crate::layout::{N_MAX, ROW_DIM};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"LFDN";
pub const WEIGHTS_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 * 8 + 8;

impl DenoiserParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = self.architecture();
        let count = arch.param_count();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * count);
        out.extend_from_slice(WEIGHTS_MAGIC);
        for v in [
            WEIGHTS_VERSION,
            ROW_DIM as u32,
            N_MAX as u32,
            TIME_DIM as u32,
            COND_DIM as u32,
            arch.hidden as u32,
            arch.context as u32,
            arch.timesteps as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(count as u64).to_le_bytes());
        for tensor in self.tensors() {
            for v in tensor {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != WEIGHTS_MAGIC {
            return Err(Error::Weights("not a layoutforge weights file".into()));
        }
        let word = |i: usize| {
            let at = 4 + 4 * i;
            u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize
        };
        let version = word(0) as u32;
        if version != WEIGHTS_VERSION {
            return Err(Error::Weights(format!(
                "unsupported weights version {version}, expected {WEIGHTS_VERSION}"
            )));
        }
        let fixed = [(word(1), ROW_DIM, "row_dim"), (word(2), N_MAX, "slots")];
        let fixed = fixed
            .into_iter()
            .chain([(word(3), TIME_DIM, "time_dim"), (word(4), COND_DIM, "cond_dim")]);
        for (got, want, name) in fixed {
            if got != want {
                return Err(Error::Weights(format!("{name} is {got}, expected {want}")));
            }
        }
        let arch = Architecture {
            hidden: word(5),
            context: word(6),
            timesteps: word(7),
        };
        if arch.hidden == 0 || arch.context == 0 || arch.timesteps == 0 {
            return Err(Error::Weights("architecture dimensions must be positive".into()));
        }
        let count = u64::from_le_bytes(bytes[36..44].try_into().expect("8 bytes")) as usize;
        if count != arch.param_count() {
            return Err(Error::Weights(format!(
                "parameter count {count} does not match architecture ({})",
                arch.param_count()
            )));
        }
        let body = &bytes[HEADER_LEN..];
        if body.len() != 8 * count {
            return Err(Error::Weights(format!(
                "expected {} bytes of parameters, found {}",
                8 * count,
                body.len()
            )));
        }
        let mut params = DenoiserParams::zeros(arch);
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        for (tensor, name) in params.tensors_mut().into_iter().zip(TENSOR_NAMES) {
            for slot in tensor.iter_mut() {
                *slot = values.next().expect("length checked");
                if !slot.is_finite() {
                    return Err(Error::Weights(format!("non-finite value in {name}")));
                }
            }
        }
        Ok(params)
    }
}

pub fn save_weights(path: impl AsRef<Path>, params: &DenoiserParams) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, params.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<DenoiserParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    DenoiserParams::from_bytes(&bytes)
}

/// JSON written next to a weights file: vocabulary and the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSidecar {
    pub format_version: u32,
    pub vocab_version: u32,
    pub vocabulary: Vec<String>,
    pub architecture: Architecture,
    pub schedule: ScheduleConfig,
    pub train: TrainConfig,
    pub epoch_losses: Vec<f64>,
}

impl WeightsSidecar {
    pub fn new(
        architecture: Architecture,
        schedule: ScheduleConfig,
        train: TrainConfig,
        epoch_losses: Vec<f64>,
    ) -> Self {
        Self {
            format_version: WEIGHTS_VERSION,
            vocab_version: VOCAB_VERSION,
            vocabulary: VOCABULARY.iter().map(|w| w.to_string()).collect(),
            architecture,
            schedule,
            train,
            epoch_losses,
        }
    }

    /// `weights.bin` → `weights.bin.json`.
    pub fn path_for(weights: impl AsRef<Path>) -> PathBuf {
        let mut os = weights.as_ref().as_os_str().to_owned();
        os.push(".json");
        PathBuf::from(os)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let sidecar: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if sidecar.vocab_version != VOCAB_VERSION || sidecar.vocabulary != VOCABULARY {
            return Err(Error::Weights(
                "weights were trained with a different vocabulary".into(),
            ));
        }
        Ok(sidecar)
    }
}

/// Weights ready for sampling, with the schedule they were trained under.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub params: DenoiserParams,
    pub schedule: ScheduleConfig,
    pub sidecar: Option<WeightsSidecar>,
    /// First 12 hex digits of the SHA-256 of the weights file.
    pub version: String,
}

impl LoadedModel {
    /// Reads `path` and its sidecar when present; without a sidecar `fallback` supplies
    /// the schedule. The schedule length must match the network's time normalization.
    pub fn load(path: impl AsRef<Path>, fallback: &ScheduleConfig) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let params = DenoiserParams::from_bytes(&bytes)?;
        let sidecar_path = WeightsSidecar::path_for(path);
        let sidecar = if sidecar_path.exists() {
            Some(WeightsSidecar::load(&sidecar_path)?)
        } else {
            None
        };
        let schedule = sidecar.as_ref().map_or(*fallback, |s| s.schedule);
        schedule.build()?;
        params.check_timesteps(schedule.timesteps)?;
        let version = hex::encode(Sha256::digest(&bytes))[..12].to_string();
        Ok(Self {
            params,
            schedule,
            sidecar,
            version,
        })
    }
}
