//! Binary member files: `PSQM` magic, a little-endian `u32` format version,
//! a `u64` header length, a JSON header (config, normalization, tensor
//! table), then every parameter as a little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EnsembleMember, Layout, ModelConfig, ModelError, ModelParams, Result};
use crate::preprocess::NormalizationStats;

pub const MAGIC: &[u8; 4] = b"PSQM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    normalization: NormalizationStats,
    tensors: Vec<TensorEntry>,
    n_values: usize,
}

fn format_err(m: impl Into<String>) -> ModelError {
    ModelError::Format(m.into())
}

pub fn write_member<W: Write>(mut w: W, member: &EnsembleMember) -> Result<()> {
    let p = &member.params;
    let header = Header {
        config: p.config.clone(),
        normalization: member.stats.clone(),
        tensors: p
            .layout
            .tensors(&p.config)
            .into_iter()
            .map(|(name, shape, offset)| TensorEntry { name, shape, offset })
            .collect(),
        n_values: p.len(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| format_err(e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * p.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for v in &p.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_member<R: Read>(mut r: R) -> Result<EnsembleMember> {
    let mut fixed = [0u8; 16];
    r.read_exact(&mut fixed).map_err(|_| format_err("file too short for a model header"))?;
    if &fixed[..4] != MAGIC {
        return Err(format_err("not a model file (bad magic)"));
    }
    let version = u32::from_le_bytes(fixed[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported model format version {version}")));
    }
    let header_len = u64::from_le_bytes(fixed[8..16].try_into().expect("8 bytes")) as usize;
    let mut json = vec![0u8; header_len];
    r.read_exact(&mut json).map_err(|_| format_err("truncated model header"))?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| format_err(format!("bad model header: {e}")))?;

    header.config.validate()?;
    let layout = Layout::new(&header.config);
    if header.n_values != layout.len {
        return Err(format_err(format!(
            "header lists {} values, config implies {}",
            header.n_values, layout.len
        )));
    }
    let expected: Vec<TensorEntry> = layout
        .tensors(&header.config)
        .into_iter()
        .map(|(name, shape, offset)| TensorEntry { name, shape, offset })
        .collect();
    if header.tensors != expected {
        return Err(format_err("tensor table does not match the config"));
    }
    let mut raw = vec![0u8; 8 * header.n_values];
    r.read_exact(&mut raw).map_err(|_| format_err("truncated parameter data"))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(format_err("trailing bytes after parameter data"));
    }
    let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let params = ModelParams::from_data(&header.config, data)?;
    EnsembleMember::new(params, header.normalization)
}

pub fn save_member(path: &Path, member: &EnsembleMember) -> Result<()> {
    let mut buf = Vec::new();
    write_member(&mut buf, member)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_member(path: &Path) -> Result<EnsembleMember> {
    let bytes = std::fs::read(path)?;
    read_member(bytes.as_slice())
}
