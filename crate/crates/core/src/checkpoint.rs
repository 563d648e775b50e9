//! Binary parameter checkpoints.
//!
//! Layout: the magic `PCWNET1\n`, then per parameter in declaration order:
//! name length (u32 LE), name bytes, rank (u32 LE), each dim (u32 LE), and
//! the values as little-endian IEEE-754 binary64.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"PCWNET1\n";

pub fn encode<'a>(entries: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Vec<u8> {
    let mut buf = MAGIC.to_vec();
    for (name, t) in entries {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader {
        bytes,
        pos: 0,
        path: origin,
    };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        r.pos = 0;
        return Err(r.err("bad magic, not a PCWNET1 checkpoint"));
    }
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let name_len = r.u32("name length")? as usize;
        let start = r.pos;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                offset: start,
                msg: "parameter name is not UTF-8".into(),
            })?
            .to_string();
        let rank = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let n: usize = shape.iter().product();
        let at = r.pos;
        let raw = r.take(n * 8, "values")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            offset: at,
            msg: e.to_string(),
        })?;
        out.push((name, t));
    }
    Ok(out)
}

pub fn save<'a>(path: &Path, entries: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Result<()> {
    fs::write(path, encode(entries))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = fs::read(path)?;
    decode(&bytes, path)
}
