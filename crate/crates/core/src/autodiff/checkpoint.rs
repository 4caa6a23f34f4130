//! Parameter checkpoints: a binary tensor container (`<base>.bin`) next to a
//! JSON manifest (`<base>.json`).
//!
//! Binary layout, little endian: `u64` tensor count, then per tensor
//! `u64 rows, u64 cols` followed by `rows * cols` f64 values in row-major
//! order.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Activation, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub name: String,
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckpointManifest {
    pub networks: Vec<NetworkEntry>,
    pub seed: u64,
    pub steps: u64,
    /// Free-form settings needed to rebuild the model.
    pub meta: BTreeMap<String, String>,
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn save_checkpoint(base: &Path, tensors: &[&Tensor], manifest: &CheckpointManifest) -> Result<()> {
    let mut buf = Vec::new();
    buf.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for t in tensors {
        buf.write_all(&(t.rows as u64).to_le_bytes())?;
        buf.write_all(&(t.cols as u64).to_le_bytes())?;
        for v in &t.data {
            buf.write_all(&v.to_le_bytes())?;
        }
    }
    fs::write(with_ext(base, "bin"), buf)?;
    fs::write(with_ext(base, "json"), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

pub fn load_checkpoint(base: &Path) -> Result<(Vec<Tensor>, CheckpointManifest)> {
    let manifest: CheckpointManifest =
        serde_json::from_str(&fs::read_to_string(with_ext(base, "json"))?)?;
    let bytes = fs::read(with_ext(base, "bin"))?;
    let mut r = &bytes[..];
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut &[u8]| -> Result<u64> {
        r.read_exact(&mut b8)
            .map_err(|_| Error::invalid("truncated checkpoint"))?;
        Ok(u64::from_le_bytes(b8))
    };
    let count = next_u64(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let rows = next_u64(&mut r)? as usize;
        let cols = next_u64(&mut r)? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| n * 8 <= r.len())
            .ok_or_else(|| Error::invalid("truncated checkpoint"))?;
        let data = (0..n)
            .map(|_| next_u64(&mut r).map(f64::from_bits))
            .collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor::from_vec(rows, cols, data)?);
    }
    if !r.is_empty() {
        return Err(Error::invalid("trailing bytes in checkpoint"));
    }
    Ok((tensors, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ckpt");
        let a = Tensor::from_vec(2, 3, vec![1.0, -2.0, 3.5, 0.0, 1e-300, -7.25]).unwrap();
        let b = Tensor::scalar(4.0);
        let mut m = CheckpointManifest {
            seed: 9,
            steps: 12,
            ..Default::default()
        };
        m.meta.insert("mode".into(), "sda".into());
        save_checkpoint(&base, &[&a, &b], &m).unwrap();
        let (t, m2) = load_checkpoint(&base).unwrap();
        assert_eq!(t, vec![a, b]);
        assert_eq!(m2, m);
        let raw = std::fs::read(base.with_extension("bin")).unwrap();
        assert_eq!(&raw[0..8], &2u64.to_le_bytes());
        assert_eq!(raw.len(), 8 + 16 + 48 + 16 + 8);
    }
}
