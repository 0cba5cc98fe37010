//! Binary checkpoints.
//!
//! Layout (little-endian): magic `DPMLM\0`, `u16` version, six `u32` dims
//! (vocab, hidden, heads, ffn, layers, max_len), `u64` vocabulary fingerprint,
//! `u32` tensor count, then per tensor a `u32` name length, the UTF-8 name,
//! a `u64` element count and the `f64` values, in [`Params::named`] order.

use std::io::{Read, Write};
use std::path::Path;

use super::model::{Dims, Params, TinyMlm};
use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"DPMLM\0";
const VERSION: u16 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Checkpoint(e.to_string())
}

pub fn write_checkpoint<W: Write>(mut w: W, model: &TinyMlm, vocab_hash: u64) -> Result<()> {
    let d = &model.dims;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for v in [d.vocab, d.hidden, d.heads, d.ffn, d.layers, d.max_len] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&vocab_hash.to_le_bytes());
    let named = model.params.named();
    buf.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, t) in named {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for x in t {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(io_err)
}

struct Cursor<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.b.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.b[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a checkpoint. When `expect_vocab_hash` is given it must match.
pub fn read_checkpoint<R: Read>(mut r: R, expect_vocab_hash: Option<u64>) -> Result<(TinyMlm, u64)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    let mut c = Cursor { b: &bytes, at: 0 };
    if c.take(6)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut dv = [0usize; 6];
    for v in &mut dv {
        *v = c.u32()? as usize;
    }
    let dims = Dims {
        vocab: dv[0],
        hidden: dv[1],
        heads: dv[2],
        ffn: dv[3],
        layers: dv[4],
        max_len: dv[5],
    };
    dims.validate()?;
    let hash = c.u64()?;
    if let Some(h) = expect_vocab_hash {
        if h != hash {
            return Err(Error::Checkpoint(format!(
                "vocabulary fingerprint {hash:016x} does not match {h:016x}"
            )));
        }
    }
    let mut params = Params::zeros(&dims);
    let expected: Vec<(String, usize)> = params
        .named()
        .into_iter()
        .map(|(n, t)| (n, t.len()))
        .collect();
    let count = c.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors, expected {}",
            expected.len()
        )));
    }
    for ((name, len), t) in expected.into_iter().zip(params.tensors_mut()) {
        let nl = c.u32()? as usize;
        let got = std::str::from_utf8(c.take(nl)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if got != name {
            return Err(Error::Checkpoint(format!("expected tensor {name}, found {got}")));
        }
        let n = c.u64()? as usize;
        if n != len {
            return Err(Error::Checkpoint(format!("{name}: {n} values, expected {len}")));
        }
        for x in t.iter_mut() {
            *x = f64::from_le_bytes(c.take(8)?.try_into().unwrap());
        }
    }
    if c.at != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    if !params.all_finite() {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    Ok((TinyMlm { dims, params }, hash))
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &TinyMlm, vocab_hash: u64) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_checkpoint(&mut w, model, vocab_hash)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>, expect_vocab_hash: Option<u64>) -> Result<TinyMlm> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(read_checkpoint(std::io::BufReader::new(f), expect_vocab_hash)?.0)
}
