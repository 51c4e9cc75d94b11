//! Binary checkpoints: `MS3DCKPT`, a little-endian `u32` version, a
//! little-endian `u64` header length, a JSON header naming every tensor
//! and its shape, then all tensor values as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Discriminator, GanModel, Generator, ModelSpec};
use crate::error::{Error, Result};
use crate::model::Critic;
use crate::tensor::Array;

const MAGIC: &[u8; 8] = b"MS3DCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    step: usize,
    tensors: Vec<(String, Vec<usize>)>,
}

fn corrupt(path: &Path, detail: impl Into<String>) -> Error {
    Error::Format {
        format: "checkpoint",
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

pub fn encode(model: &GanModel, step: usize) -> Result<Vec<u8>> {
    let named = |prefix: &str, params: &[Array]| -> Vec<(String, Vec<usize>)> {
        params
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("{prefix}.{i}"), p.shape().to_vec()))
            .collect()
    };
    let g = model.generator.params();
    let d = model.discriminator.params();
    let mut tensors = named("generator", g);
    tensors.extend(named("discriminator", d));
    let header = serde_json::to_vec(&Header {
        spec: model.spec().clone(),
        step,
        tensors,
    })
    .map_err(|e| Error::invalid(format!("checkpoint header: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for p in g.iter().chain(d) {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Returns the model and the step it was saved at.
pub fn decode(bytes: &[u8], path: &Path) -> Result<(GanModel, usize)> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt(path, "missing MS3DCKPT magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(path, format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let header_end = 20usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt(path, "truncated header"))?;
    let header: Header =
        serde_json::from_slice(&bytes[20..header_end]).map_err(|e| corrupt(path, format!("header: {e}")))?;
    let mut body = bytes[header_end..].chunks_exact(8);
    let mut generator = Vec::new();
    let mut discriminator = Vec::new();
    for (name, shape) in &header.tensors {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = body
            .by_ref()
            .take(n)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if data.len() != n {
            return Err(corrupt(path, format!("tensor {name} is truncated")));
        }
        let array = Array::new(shape.clone(), data)?;
        match name.split_once('.') {
            Some(("generator", _)) => generator.push(array),
            Some(("discriminator", _)) => discriminator.push(array),
            _ => return Err(corrupt(path, format!("unknown tensor {name:?}"))),
        }
    }
    if body.next().is_some() || !body.remainder().is_empty() {
        return Err(corrupt(path, "trailing bytes after tensor data"));
    }
    let model = GanModel {
        generator: Generator::from_params(&header.spec, generator).map_err(|e| corrupt(path, e.to_string()))?,
        discriminator: Discriminator::from_params(&header.spec, discriminator)
            .map_err(|e| corrupt(path, e.to_string()))?,
    };
    Ok((model, header.step))
}

pub fn save_checkpoint(path: &Path, model: &GanModel, step: usize) -> Result<()> {
    fs::write(path, encode(model, step)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(GanModel, usize)> {
    decode(&fs::read(path).map_err(|e| Error::read(path, e))?, path)
}
