//! `ArrayFile`: `"GLAM"`, version `u16`, ndim `u16`, dims `u64` each, then
//! the column-major payload as `f64`. All integers and floats little-endian.

use std::fs;
use std::path::Path;

use glam_core::{ArrayDims, DenseArray};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"GLAM";
pub const VERSION: u16 = 1;

pub fn encode(array: &DenseArray) -> Vec<u8> {
    let dims = array.dims().as_slice();
    let mut out = Vec::with_capacity(8 + 8 * dims.len() + 8 * array.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u16).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in array.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses an encoded array; `origin` only labels errors.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<DenseArray> {
    let bad = |msg: String| CliError::format(origin, msg);
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("not an array file (bad magic)".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported array file version {version}")));
    }
    let ndim = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let header = 8 + 8 * ndim;
    if bytes.len() < header {
        return Err(bad("truncated header".into()));
    }
    let dims: Vec<usize> = bytes[8..header]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let size = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| bad("dims overflow".into()))?;
    let payload = &bytes[header..];
    if Some(payload.len()) != size.checked_mul(8) {
        return Err(bad(format!("payload has {} bytes, dims {dims:?} need {}", payload.len(), 8 * size)));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let dims = ArrayDims::new(dims).map_err(|e| bad(e.to_string()))?;
    DenseArray::new(dims, values).map_err(|e| bad(e.to_string()))
}

pub fn read_array(path: &Path) -> Result<DenseArray> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes, path)
}

pub fn write_array(path: &Path, array: &DenseArray) -> Result<()> {
    fs::write(path, encode(array)).map_err(|e| CliError::io(path, e))
}
