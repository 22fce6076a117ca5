//! Policy checkpoints.
//!
//! ```text
//! cnotsynth-policy\n
//! {json header}\n
//! <param_count little-endian f32 values>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::net::{Architecture, PolicyParams};
use super::train::TrainConfig;

pub const MAGIC: &str = "cnotsynth-policy";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub m: usize,
    pub architecture: Architecture,
    /// Training configuration, kept for provenance.
    pub config: Option<TrainConfig>,
    /// FNV-1a of the config JSON, hex.
    pub config_hash: String,
    /// Curriculum phase just completed, if written mid-training.
    pub phase: Option<usize>,
    pub episodes: usize,
}

impl CheckpointMeta {
    pub fn new(cfg: &TrainConfig, phase: Option<usize>, episodes: usize) -> Self {
        let json = serde_json::to_string(cfg).expect("config serializes");
        Self {
            version: FORMAT_VERSION,
            m: cfg.m,
            architecture: cfg.architecture(),
            config: Some(cfg.clone()),
            config_hash: format!("{:016x}", fnv1a(json.as_bytes())),
            phase,
            episodes,
        }
    }

    /// Header for parameters of unknown provenance.
    pub fn bare(arch: Architecture) -> Self {
        Self {
            version: FORMAT_VERSION,
            m: (arch.input as f64).sqrt() as usize,
            architecture: arch,
            config: None,
            config_hash: format!("{:016x}", fnv1a(b"")),
            phase: None,
            episodes: 0,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn encode(params: &PolicyParams<f32>, meta: &CheckpointMeta) -> Result<Vec<u8>> {
    if meta.architecture != *params.arch() {
        return Err(Error::Checkpoint("header architecture differs from parameters".into()));
    }
    let mut out = Vec::with_capacity(params.flat().len() * 4 + 512);
    writeln!(out, "{MAGIC}")?;
    serde_json::to_writer(&mut out, meta)?;
    out.push(b'\n');
    for v in params.flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(PolicyParams<f32>, CheckpointMeta)> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    let magic_end = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing magic line"))?;
    if &bytes[..magic_end] != MAGIC.as_bytes() {
        return Err(bad("not a policy checkpoint"));
    }
    let rest = &bytes[magic_end + 1..];
    let header_end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header"))?;
    let meta: CheckpointMeta = serde_json::from_slice(&rest[..header_end])?;
    if meta.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", meta.version)));
    }
    let body = &rest[header_end + 1..];
    let count = meta.architecture.param_count();
    if body.len() != count * 4 {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            count * 4,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let params = PolicyParams::from_flat(meta.architecture.clone(), data)?;
    if !params.is_finite() {
        return Err(bad("non-finite parameter"));
    }
    Ok((params, meta))
}

pub fn write_checkpoint(path: &Path, params: &PolicyParams<f32>, meta: &CheckpointMeta) -> Result<()> {
    fs::write(path, encode(params, meta)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(PolicyParams<f32>, CheckpointMeta)> {
    decode(&fs::read(path)?)
}
