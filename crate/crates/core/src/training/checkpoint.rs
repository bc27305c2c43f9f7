//! Binary checkpoint format.
//!
//! ```text
//! "VSTM" | u32 version | section config | section vocab | section params | section optim
//! ```
//!
//! Every section is a `u64` byte length followed by its payload. Integers and
//! floats are little-endian. The config section is JSON holding the model and
//! training configs. A tensor block is `u8 dtype` (0 = f64, 1 = f32), `u32`
//! tensor count, then for each tensor its name, `u32` rank, `u64` dims and
//! values. The output contains nothing time- or host-dependent, so saving the
//! same state twice yields identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{self, put_bytes_u32, put_section, put_u32, put_u64, Reader, Truncated};
use crate::model::{ModelConfig, StoryModel, StoryParams};
use crate::text::Vocab;

use super::{OptimState, Precision, TrainConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VSTM";
pub const CHECKPOINT_VERSION: u32 = 1;

const DTYPE_F64: u8 = 0;
const DTYPE_F32: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("file ends before the checkpoint is complete")]
    Truncated,
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<Truncated> for CheckpointError {
    fn from(_: Truncated) -> Self {
        CheckpointError::Truncated
    }
}

fn corrupt(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Corrupt(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: StoryModel,
    pub optim: OptimState,
    pub vocab: Vocab,
    pub train: TrainConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigSection {
    model: ModelConfig,
    train: TrainConfig,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);

        let config = serde_json::to_vec(&ConfigSection {
            model: self.model.config.clone(),
            train: self.train.clone(),
        })
        .map_err(|e| corrupt(e.to_string()))?;
        put_section(&mut out, &config);

        let mut vocab = Vec::new();
        put_u32(&mut vocab, self.vocab.len() as u32);
        for (tok, &count) in self.vocab.tokens().iter().zip(self.vocab.counts()) {
            put_bytes_u32(&mut vocab, tok.as_bytes());
            put_u64(&mut vocab, count);
        }
        put_section(&mut out, &vocab);

        let dtype = match self.train.precision {
            Precision::Double => DTYPE_F64,
            Precision::Single => DTYPE_F32,
        };
        let mut params = Vec::new();
        write_tensors(&mut params, &self.model.params, dtype);
        put_section(&mut out, &params);

        let mut optim = Vec::new();
        put_u64(&mut optim, self.optim.t);
        write_tensors(&mut optim, &self.optim.m, dtype);
        write_tensors(&mut optim, &self.optim.v, dtype);
        put_section(&mut out, &optim);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }

        let config: ConfigSection =
            serde_json::from_slice(r.section()?).map_err(|e| corrupt(format!("config section: {e}")))?;
        config
            .model
            .validate()
            .map_err(|e| corrupt(format!("model config: {e}")))?;

        let mut vr = Reader::new(r.section()?);
        let n = vr.u32()? as usize;
        let mut tokens = Vec::with_capacity(n.min(1 << 20));
        let mut counts = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let tok = std::str::from_utf8(vr.bytes_u32()?).map_err(|_| corrupt("vocabulary token is not UTF-8"))?;
            tokens.push(tok.to_string());
            counts.push(vr.u64()?);
        }
        expect_end(&vr, "vocab")?;
        let vocab = Vocab::from_parts(tokens, counts).map_err(|e| corrupt(e.to_string()))?;
        if vocab.len() != config.model.vocab_size {
            return Err(corrupt(format!(
                "vocabulary has {} tokens but the model expects {}",
                vocab.len(),
                config.model.vocab_size
            )));
        }

        let mut pr = Reader::new(r.section()?);
        let params = read_tensors(&mut pr, &config.model)?;
        expect_end(&pr, "params")?;

        let mut or = Reader::new(r.section()?);
        let t = or.u64()?;
        let m = read_tensors(&mut or, &config.model)?;
        let v = read_tensors(&mut or, &config.model)?;
        expect_end(&or, "optim")?;

        if r.remaining() != 0 {
            return Err(corrupt(format!("{} trailing bytes", r.remaining())));
        }
        let model = StoryModel::from_parts(config.model, params).map_err(|e| corrupt(e.to_string()))?;
        Ok(Self {
            model,
            optim: OptimState { m, v, t },
            vocab,
            train: config.train,
        })
    }
}

fn expect_end(r: &Reader<'_>, section: &str) -> Result<(), CheckpointError> {
    if r.remaining() == 0 {
        Ok(())
    } else {
        Err(corrupt(format!("{section} section has {} unread bytes", r.remaining())))
    }
}

fn write_tensors(out: &mut Vec<u8>, params: &StoryParams, dtype: u8) {
    let views = params.views();
    out.push(dtype);
    put_u32(out, views.len() as u32);
    for v in views {
        put_bytes_u32(out, v.name.as_bytes());
        put_u32(out, v.shape.len() as u32);
        for &d in &v.shape {
            put_u64(out, d as u64);
        }
        for &x in v.data {
            match dtype {
                DTYPE_F32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
                _ => out.extend_from_slice(&x.to_le_bytes()),
            }
        }
    }
}

fn read_tensors(r: &mut Reader<'_>, cfg: &ModelConfig) -> Result<StoryParams, CheckpointError> {
    let dtype = r.u8()?;
    if dtype != DTYPE_F64 && dtype != DTYPE_F32 {
        return Err(corrupt(format!("unknown dtype {dtype}")));
    }
    let mut params = StoryParams::zeros(cfg);
    let expected: Vec<(String, Vec<usize>)> = params.views().into_iter().map(|v| (v.name, v.shape)).collect();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(corrupt(format!("expected {} tensors, found {count}", expected.len())));
    }
    for ((name, shape), dst) in expected.iter().zip(params.tensors_mut()) {
        let got = std::str::from_utf8(r.bytes_u32()?).map_err(|_| corrupt("tensor name is not UTF-8"))?;
        if got != name {
            return Err(corrupt(format!("expected tensor {name}, found {got}")));
        }
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if &dims != shape {
            return Err(corrupt(format!("tensor {name} has shape {dims:?}, expected {shape:?}")));
        }
        for slot in dst.iter_mut() {
            *slot = match dtype {
                DTYPE_F32 => r.f32()? as f64,
                _ => r.f64()?,
            };
            if !slot.is_finite() {
                return Err(corrupt(format!("tensor {name} holds a non-finite value")));
            }
        }
    }
    Ok(params)
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let bytes = ckpt.to_bytes()?;
    binio::write_atomic(path, &bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
