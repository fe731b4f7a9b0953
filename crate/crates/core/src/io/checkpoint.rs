//! Model checkpoint container.
//!
//! ```text
//! magic     8 bytes "PRTCKPT\0"
//! version   u32     = 1
//! head      u32 length + UTF-8 head name
//! config    u32 length + UTF-8 TOML of the model configuration
//! tensors   u32 count, then per tensor: u32 name length, name,
//!           u32 rank, rank x u64 dims
//! values    parameters as LE f64 in tensor-table order
//! crc       u32 CRC-32 of everything before it
//! ```

use std::path::Path;

use super::bytes::{Reader, Writer};
use crate::encoders::{FusionModel, HeadKind, ModelConfig, TensorSpec};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PRTCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model together with the head it was trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub head: HeadKind,
    pub model: FusionModel,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let cfg = toml::to_string(ckpt.model.config()).map_err(|e| Error::Format(format!("model config: {e}")))?;
    let mut w = Writer::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.text(ckpt.head.name());
    w.text(&cfg);
    w.u32(ckpt.model.tensors().len() as u32);
    for t in ckpt.model.tensors() {
        w.text(&t.name);
        w.u32(t.shape.len() as u32);
        for &d in &t.shape {
            w.u64(d as u64);
        }
    }
    for &v in ckpt.model.params() {
        w.f64(v);
    }
    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    Ok(w.buf)
}

pub fn decode_checkpoint(data: &[u8]) -> Result<Checkpoint> {
    if data.len() < 12 {
        return Err(Error::Truncated("checkpoint shorter than its header".into()));
    }
    if &data[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let (body, crc) = data.split_at(data.len() - 4);
    let mut r = Reader::new(body, "checkpoint");
    r.take(8)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    if u32::from_le_bytes(crc.try_into().unwrap()) != crc32fast::hash(body) {
        return Err(Error::Format("checkpoint checksum mismatch".into()));
    }
    let head: HeadKind = r.text()?.parse()?;
    let config: ModelConfig = toml::from_str(&r.text()?).map_err(|e| Error::Format(format!("model config: {e}")))?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    let mut offset = 0usize;
    for _ in 0..count {
        let name = r.text()?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let len: usize = shape.iter().product();
        tensors.push(TensorSpec { name, shape, offset });
        offset += len;
    }
    let mut params = Vec::with_capacity(offset.min(1 << 24));
    for _ in 0..offset {
        params.push(r.f64()?);
    }
    if !r.is_done() {
        return Err(Error::Format("trailing bytes in checkpoint".into()));
    }
    let model = FusionModel::from_parts(config, &tensors, params)?;
    Ok(Checkpoint { head, model })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
