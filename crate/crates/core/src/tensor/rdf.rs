//! `RDF1` binary tensor files.
//!
//! Layout: the magic bytes `RDF1`, a little-endian `u32` rank, `rank`
//! little-endian `u32` extents, then row-major little-endian `f32` values.
//! Values are widened to `f64` on load.

use std::fs;
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RDF1";

pub fn encode(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let bad = |detail: &str| Error::Format {
        what: "RDF1 tensor",
        detail: detail.to_string(),
    };
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("missing RDF1 magic"));
    }
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(i..i + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| bad("truncated header"))
    };
    let rank = word(4)? as usize;
    let shape = (0..rank)
        .map(|k| word(8 + 4 * k).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let n: usize = shape.iter().product();
    let start = 8 + 4 * rank;
    if bytes.len() != start + 4 * n {
        return Err(bad(&format!(
            "shape {shape:?} needs {} payload bytes, found {}",
            4 * n,
            bytes.len().saturating_sub(start)
        )));
    }
    let data = bytes[start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Tensor::new(shape, data)
}

pub fn write(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(t)).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
