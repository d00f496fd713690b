//! Checkpoint files: `LSPTM1`, a little-endian `u64` header length, a JSON
//! header, then every tensor as little-endian `f32` in index order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use lsptm_core::clip::NormStats;
use lsptm_core::models::BackboneKind;
use lsptm_core::train::ExperimentConfig;
use lsptm_core::{ModelParams, Tensor};

use crate::config::config_digest;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"LSPTM1";
const PREFIX: usize = MAGIC.len() + 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the payload.
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub backbone: String,
    pub config: ExperimentConfig,
    pub norm: NormStats,
    pub config_digest: String,
    pub payload_bytes: u64,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub params: ModelParams<f32>,
}

pub fn encode(config: &ExperimentConfig, params: &ModelParams<f32>) -> Vec<u8> {
    let mut tensors = Vec::with_capacity(params.len());
    let mut payload = Vec::with_capacity(params.num_elements() * 4);
    for (name, t) in params.iter() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset: payload.len() as u64,
        });
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = Header {
        backbone: config.model.kind().id().to_string(),
        config: config.clone(),
        norm: config.norm,
        config_digest: config_digest(config),
        payload_bytes: payload.len() as u64,
        tensors,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(PREFIX + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out
}

pub fn save_checkpoint(path: &Path, config: &ExperimentConfig, params: &ModelParams<f32>) -> Result<()> {
    fs::write(path, encode(config, params)).map_err(Error::io(path))
}

/// Parses and validates checkpoint bytes. With `expected` set, a header for
/// another backbone is rejected.
pub fn decode(bytes: &[u8], path: &Path, expected: Option<BackboneKind>) -> Result<Checkpoint> {
    let path_buf = || path.to_path_buf();
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic { path: path_buf() });
    }
    let truncated = |expected: u64| Error::Truncated {
        path: path_buf(),
        expected,
        found: bytes.len() as u64,
    };
    if bytes.len() < PREFIX {
        return Err(truncated(PREFIX as u64));
    }
    let header_len = u64::from_le_bytes(bytes[MAGIC.len()..PREFIX].try_into().expect("8 bytes"));
    let header_end = (PREFIX as u64).saturating_add(header_len);
    if (bytes.len() as u64) < header_end {
        return Err(truncated(header_end));
    }
    let header_end = header_end as usize;
    let corrupt = |reason: String| Error::Header { path: path_buf(), reason };
    let header: Header = serde_json::from_slice(&bytes[PREFIX..header_end]).map_err(|e| corrupt(e.to_string()))?;

    if header.backbone != header.config.model.kind().id() {
        return Err(corrupt(format!(
            "backbone `{}` disagrees with its config ({})",
            header.backbone,
            header.config.model.kind().id()
        )));
    }
    if let Some(kind) = expected {
        if header.backbone != kind.id() {
            return Err(Error::BackboneMismatch {
                expected: kind.id().into(),
                found: header.backbone,
            });
        }
    }
    if header.config_digest != config_digest(&header.config) {
        return Err(corrupt("config digest does not match the stored config".into()));
    }

    let payload = &bytes[header_end..];
    if (payload.len() as u64) < header.payload_bytes {
        return Err(truncated(header_end as u64 + header.payload_bytes));
    }
    if payload.len() as u64 > header.payload_bytes {
        return Err(corrupt(format!(
            "{} trailing bytes after the payload",
            payload.len() as u64 - header.payload_bytes
        )));
    }

    let registry: ModelParams<f32> = header.config.model.init(0)?;
    let mut params = ModelParams::new();
    for entry in &header.tensors {
        let want = registry
            .get(&entry.name)
            .ok_or_else(|| corrupt(format!("unknown tensor `{}`", entry.name)))?;
        if want.shape() != entry.shape.as_slice() {
            return Err(Error::ShapeMismatch {
                path: path_buf(),
                name: entry.name.clone(),
                expected: want.shape().to_vec(),
                found: entry.shape.clone(),
            });
        }
        let n = want.numel() as u64;
        let end = entry.offset.checked_add(n * 4).filter(|&e| e <= header.payload_bytes);
        let Some(end) = end else {
            return Err(corrupt(format!("tensor `{}` lies outside the payload", entry.name)));
        };
        let data = payload[entry.offset as usize..end as usize]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        params.insert(entry.name.clone(), Tensor::new(&entry.shape, data)?);
    }
    params.check_layout(&registry)?;
    Ok(Checkpoint {
        config: header.config,
        params,
    })
}

pub fn load_checkpoint(path: &Path, expected: Option<BackboneKind>) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode(&bytes, path, expected)
}
