//! Binary per-mesh feature cache.
//!
//! Layout (little-endian): magic `MMLPFT1`, rows `u64`, cols `u64`,
//! `rows * cols` `f32` values row-major, then the `u64` FNV-1a hash of the
//! source mesh file bytes.

use std::fs;
use std::io;
use std::path::Path;

pub const MAGIC: &[u8; 7] = b"MMLPFT1";

/// 64-bit FNV-1a.
pub fn content_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedFeatures {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
    pub source_hash: u64,
}

impl CachedFeatures {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 24 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.source_hash.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> io::Result<Self> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        if bytes.len() < 7 + 16 + 8 || &bytes[..7] != MAGIC {
            return Err(bad("not a feature cache file"));
        }
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let rows = u64_at(7) as usize;
        let cols = u64_at(15) as usize;
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| bad("feature cache dimensions overflow"))?;
        let body = 23;
        if bytes.len() != body + count * 4 + 8 {
            return Err(bad("feature cache length does not match its header"));
        }
        let data = bytes[body..body + count * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(CachedFeatures {
            rows,
            cols,
            data,
            source_hash: u64_at(body + count * 4),
        })
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_bytes())
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
