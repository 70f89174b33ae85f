//! `BSVG` container: little-endian header then row-major `f64` samples.
//!
//! | field          | type |
//! |----------------|------|
//! | magic `"BSVG"` | 4 B  |
//! | version        | u32  |
//! | N              | u32  |
//! | L              | f64  |
//! | support radius | f64 (NaN when undeclared) |
//! | values         | N*N f64 |

use std::fs;
use std::path::Path;

use super::{Domain, GridFunction};
use crate::error::{Error, Result};

pub const GRID_MAGIC: &[u8; 4] = b"BSVG";
pub const GRID_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

pub fn encode(f: &GridFunction) -> Vec<u8> {
    let n = f.resolution();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * n * n);
    buf.extend_from_slice(GRID_MAGIC);
    buf.extend_from_slice(&GRID_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&f.domain().side_length.to_le_bytes());
    buf.extend_from_slice(&f.support_radius().unwrap_or(f64::NAN).to_le_bytes());
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode(bytes: &[u8]) -> Result<GridFunction> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != GRID_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != GRID_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = u32_at(8) as usize;
    let side = f64_at(12);
    let support = f64_at(20);
    let expected = HEADER_LEN + 8 * n * n;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for N = {n}, found {}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let domain = Domain::new(side, n)?;
    let support = (!support.is_nan()).then_some(support);
    GridFunction::from_values(domain, values, support)
}

pub fn write_grid_function(path: &Path, f: &GridFunction) -> Result<()> {
    fs::write(path, encode(f)).map_err(|e| Error::io(path, e))
}

pub fn read_grid_function(path: &Path) -> Result<GridFunction> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
