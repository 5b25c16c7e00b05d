//! Binary checkpoint: magic, version, config digest, then for every
//! parameter its name, shape, trainable flag, Adam step count and the value
//! and both Adam moments as little-endian `f32`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::{ModelError, Network};
use crate::autodiff::Tensor;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 9] = b"MMLPCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_tensor<T: Scalar>(out: &mut Vec<u8>, t: &Tensor<T>) {
    for &v in t.data() {
        out.extend_from_slice(&v.as_f32().to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> io::Result<&[u8]> {
        if self.buf.len() < n {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated checkpoint"));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor<T: Scalar>(&mut self, rows: usize, cols: usize) -> io::Result<Tensor<T>> {
        let bytes = self.take(rows * cols * 4)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        Ok(Tensor::from_vec(rows, cols, data).expect("length checked"))
    }
}

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

impl<T: Scalar> Network<T> {
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.config().digest().to_le_bytes());
        out.extend_from_slice(&(self.params().len() as u32).to_le_bytes());
        for p in self.params().iter() {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.value.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(p.value.cols() as u32).to_le_bytes());
            out.push(p.trainable as u8);
            out.extend_from_slice(&p.step_count.to_le_bytes());
            put_tensor(&mut out, &p.value);
            put_tensor(&mut out, &p.adam_m);
            put_tensor(&mut out, &p.adam_v);
        }
        out
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), ModelError> {
        let io_err = |e| ModelError::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut f = fs::File::create(path).map_err(io_err)?;
        f.write_all(&self.checkpoint_bytes()).map_err(io_err)
    }

    /// Overwrites parameters and optimizer state from checkpoint bytes. The
    /// digest must match this network's config and every parameter must be
    /// present with its shape.
    pub fn load_checkpoint_bytes(&mut self, bytes: &[u8]) -> Result<(), ModelError> {
        let mut r = Reader { buf: bytes };
        let trunc = |e: io::Error| corrupt(e.to_string());
        if r.take(CHECKPOINT_MAGIC.len()).map_err(trunc)? != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32().map_err(trunc)?;
        if version != CHECKPOINT_VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let digest = r.u64().map_err(trunc)?;
        if digest != self.config().digest() {
            return Err(ModelError::ConfigMismatch);
        }
        let count = r.u32().map_err(trunc)? as usize;
        if count != self.params().len() {
            return Err(corrupt(format!("{count} parameters, expected {}", self.params().len())));
        }
        for _ in 0..count {
            let len = r.u32().map_err(trunc)? as usize;
            let name = String::from_utf8(r.take(len).map_err(trunc)?.to_vec()).map_err(|_| corrupt("bad name"))?;
            let rows = r.u32().map_err(trunc)? as usize;
            let cols = r.u32().map_err(trunc)? as usize;
            let trainable = r.take(1).map_err(trunc)?[0] != 0;
            let step = r.u64().map_err(trunc)?;
            let id = self.params().id(&name).ok_or_else(|| corrupt(format!("unknown parameter {name}")))?;
            let p = self.params_mut().get_mut(id);
            if p.value.shape() != (rows, cols) || p.trainable != trainable {
                return Err(corrupt(format!("parameter {name} has shape {rows}x{cols}")));
            }
            p.value = r.tensor(rows, cols).map_err(trunc)?;
            p.adam_m = r.tensor(rows, cols).map_err(trunc)?;
            p.adam_v = r.tensor(rows, cols).map_err(trunc)?;
            p.step_count = step;
            p.grad.fill(T::zero());
        }
        if !r.buf.is_empty() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(())
    }

    pub fn load_checkpoint(&mut self, path: &Path) -> Result<(), ModelError> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| ModelError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        self.load_checkpoint_bytes(&bytes)
    }
}
