//! Binary parameter file.
//!
//! ```text
//! b"vnp1"
//! u32 LE  layers, filters, kernel_size, frames
//! f64 LE  every parameter in storage order
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::params::{VnConfig, VnParams};

const MAGIC: &[u8; 4] = b"vnp1";

pub fn params_to_bytes(params: &VnParams) -> Vec<u8> {
    let c = params.config();
    let mut out = Vec::with_capacity(20 + 8 * params.values().len());
    out.extend_from_slice(MAGIC);
    for v in [c.layers, c.filters, c.kernel_size, c.frames] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<VnParams> {
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a network parameter file".into()));
    }
    let word = |i: usize| {
        let o = 4 + 4 * i;
        u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
    };
    let config = VnConfig::new(word(0), word(1), word(2), word(3))?;
    let payload = &bytes[20..];
    if payload.len() != 8 * config.param_count() {
        return Err(Error::Format(format!(
            "{config:?} needs {} bytes of parameters, file has {}",
            8 * config.param_count(),
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    VnParams::from_values(config, values)
}

pub fn write_params(params: &VnParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, params_to_bytes(params))?;
    Ok(())
}

pub fn read_params(path: impl AsRef<Path>) -> Result<VnParams> {
    params_from_bytes(&fs::read(path)?)
}
