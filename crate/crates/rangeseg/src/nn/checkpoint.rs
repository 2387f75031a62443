//! Weight snapshot format: named f32 tensors, little-endian.
//!
//! Layout: magic "RSWT", u32 tensor count, then per tensor a u16 name
//! length, UTF-8 name, u32 rank, u32 dims, f32 payload. Running batch-norm
//! statistics are stored alongside trainable weights so a reloaded model
//! evaluates identically.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::tensor::{Scalar, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RSWT";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic, expected RSWT")]
    BadMagic,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint has no tensor named {0}")]
    MissingTensor(String),
    #[error("tensor {name} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch { name: String, found: Vec<usize>, expected: Vec<usize> },
}

pub fn checkpoint_bytes<S: Scalar>(entries: &[(String, &Tensor<S>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        let nb = name.as_bytes();
        assert!(nb.len() <= u16::MAX as usize, "tensor name too long");
        out.extend_from_slice(&(nb.len() as u16).to_le_bytes());
        out.extend_from_slice(nb);
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    out
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor<f32>)>, CheckpointError> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], CheckpointError> {
        let end = pos.checked_add(n).ok_or_else(|| CheckpointError::Corrupt("length overflow".into()))?;
        if end > bytes.len() {
            return Err(CheckpointError::Corrupt(format!(
                "needs {end} bytes, file has {}",
                bytes.len()
            )));
        }
        let s = &bytes[*pos..end];
        *pos = end;
        Ok(s)
    };
    if take(&mut pos, 4)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(&mut pos, name_len)?)
            .map_err(|_| CheckpointError::Corrupt("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        if rank > 8 {
            return Err(CheckpointError::Corrupt(format!("tensor {name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut numel = 1usize;
        for _ in 0..rank {
            let d = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
            numel = numel
                .checked_mul(d)
                .ok_or_else(|| CheckpointError::Corrupt(format!("tensor {name} size overflow")))?;
            shape.push(d);
        }
        let raw = take(&mut pos, numel * 4)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        entries.push((name, Tensor::from_vec(&shape, data)));
    }
    if pos != bytes.len() {
        return Err(CheckpointError::Corrupt(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok(entries)
}

pub fn save_checkpoint<S: Scalar, P: AsRef<Path>>(
    path: P,
    entries: &[(String, &Tensor<S>)],
) -> Result<(), CheckpointError> {
    fs::write(path, checkpoint_bytes(entries))?;
    Ok(())
}

pub fn load_checkpoint<P: AsRef<Path>>(path: P) -> Result<Vec<(String, Tensor<f32>)>, CheckpointError> {
    parse_checkpoint(&fs::read(path)?)
}
