//! Model checkpoint serialization.
//!
//! Layout: magic bytes "TLMN3\0", format version (u32 LE), header length
//! (u32 LE), a UTF-8 JSON header (config, feature order, normalization
//! stats, and per-tensor name/length/byte-offset), then the parameter
//! arrays as contiguous little-endian IEEE-754 f64 in header order.
//! Round trips are bit-exact.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::NormStats;
use crate::network::{ModelConfig, ModelState};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"TLMN3\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    /// Element count.
    len: usize,
    /// Byte offset inside the data section.
    offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    feature_names: Vec<String>,
    norm_stats: NormStats,
    tensors: Vec<TensorMeta>,
}

pub fn save_checkpoint(state: &ModelState, path: &Path) -> Result<()> {
    let tensors = state.tensors();
    let mut metas = Vec::with_capacity(tensors.len());
    let mut offset = 0usize;
    for (name, t) in &tensors {
        metas.push(TensorMeta {
            name: name.clone(),
            len: t.len(),
            offset,
        });
        offset += t.len() * 8;
    }
    let header = Header {
        config: state.config.clone(),
        feature_names: state.feature_names.clone(),
        norm_stats: state.norm_stats.clone(),
        tensors: metas,
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut out = Vec::with_capacity(14 + header_bytes.len() + offset);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for (_, t) in &tensors {
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out)
        .map_err(|e| Error::checkpoint(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    let bytes = fs::read(path)
        .map_err(|e| Error::checkpoint(format!("cannot read {}: {e}", path.display())))?;
    if bytes.len() < 14 {
        return Err(Error::checkpoint("file too short for header"));
    }
    if &bytes[0..6] != CHECKPOINT_MAGIC {
        return Err(Error::checkpoint("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::checkpoint(format!(
            "unsupported checkpoint version {version}; supported: {CHECKPOINT_VERSION}"
        )));
    }
    let header_len = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if bytes.len() < 14 + header_len {
        return Err(Error::checkpoint("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[14..14 + header_len])?;
    header.config.validate()?;

    let n_feat = header.feature_names.len();
    if header.norm_stats.mean.len() != n_feat
        || header.norm_stats.std.len() != n_feat
        || header.norm_stats.exempt.len() != n_feat
    {
        return Err(Error::checkpoint(
            "normalization stats do not match the feature list",
        ));
    }

    // Rebuild an empty state with the right shapes, then fill tensors in
    // header order, insisting that names, lengths, and offsets agree.
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0);
    let mut state = ModelState::init(
        header.config.clone(),
        header.norm_stats.clone(),
        header.feature_names.clone(),
        &mut rng,
    )?;

    let data = &bytes[14 + header_len..];
    let expected: Vec<(String, usize)> = state
        .tensors()
        .iter()
        .map(|(n, t)| (n.clone(), t.len()))
        .collect();
    if header.tensors.len() != expected.len() {
        return Err(Error::checkpoint(format!(
            "expected {} tensors, header lists {}",
            expected.len(),
            header.tensors.len()
        )));
    }
    let mut cursor = 0usize;
    for (meta, (name, len)) in header.tensors.iter().zip(&expected) {
        if &meta.name != name || meta.len != *len || meta.offset != cursor {
            return Err(Error::checkpoint(format!(
                "tensor layout mismatch at '{}': expected '{name}' len {len} offset {cursor}, \
                 got len {} offset {}",
                meta.name, meta.len, meta.offset
            )));
        }
        cursor += len * 8;
    }
    if data.len() != cursor {
        return Err(Error::checkpoint(format!(
            "data section is {} bytes, layout requires {cursor}",
            data.len()
        )));
    }

    for (meta, (_, tensor)) in header.tensors.iter().zip(state.tensors_mut()) {
        let start = meta.offset;
        for (i, v) in tensor.iter_mut().enumerate() {
            let o = start + i * 8;
            *v = f64::from_le_bytes(data[o..o + 8].try_into().unwrap());
        }
    }
    Ok(state)
}
