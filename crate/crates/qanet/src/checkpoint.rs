//! Model checkpoints.
//!
//! Layout: the bytes `QANT`, a little-endian `u32` version, a `u32` byte
//! length followed by the JSON architecture config, then every tensor as
//! little-endian `f32` in the network's declaration order. Tensor lengths are
//! implied by the architecture.

use std::path::Path;

use qanet_core::nn::{ArchConfig, ModelParams};

use crate::error::{Context, Error, Result};

pub const MAGIC: &[u8; 4] = b"QANT";
pub const VERSION: u32 = 1;

pub fn encode(params: &ModelParams<f32>) -> Vec<u8> {
    let json = serde_json::to_vec(params.arch()).expect("config serializes");
    let n: usize = params.tensors().iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(12 + json.len() + 4 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in params.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::input(format!("checkpoint truncated in {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn take_u32(bytes: &mut &[u8], what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(take(bytes, 4, what)?.try_into().expect("4 bytes")))
}

pub fn decode(mut bytes: &[u8]) -> Result<ModelParams<f32>> {
    let b = &mut bytes;
    if take(b, 4, "magic")? != MAGIC {
        return Err(Error::input("not a checkpoint (bad magic)"));
    }
    let version = take_u32(b, "version")?;
    if version != VERSION {
        return Err(Error::input(format!("unsupported checkpoint version {version}")));
    }
    let len = take_u32(b, "config length")? as usize;
    let arch: ArchConfig = serde_json::from_slice(take(b, len, "config")?).input_err("checkpoint config")?;
    arch.validate().input_err("checkpoint config")?;
    let shapes = ModelParams::<f32>::zeros(&arch).input_err("checkpoint config")?;
    let mut tensors = Vec::with_capacity(shapes.tensors().len());
    for (spec, t) in shapes.graph().specs.iter().zip(shapes.tensors()) {
        let raw = take(b, 4 * t.len(), &spec.name)?;
        tensors.push(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        );
    }
    if !b.is_empty() {
        return Err(Error::input(format!("checkpoint has {} trailing bytes", b.len())));
    }
    ModelParams::from_tensors(&arch, tensors).input_err("checkpoint tensors")
}

pub fn save(path: &Path, params: &ModelParams<f32>) -> Result<()> {
    std::fs::write(path, encode(params)).internal_err(path.display())
}

pub fn load(path: &Path) -> Result<ModelParams<f32>> {
    let bytes = std::fs::read(path).input_err(path.display())?;
    decode(&bytes).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}
