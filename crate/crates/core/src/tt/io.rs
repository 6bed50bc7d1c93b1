//! TTF1 binary format: magic `TTF1`, little-endian `u64 d`, `u64 modes[d]`,
//! `u64 ranks[d+1]`, then each core as `f64` values (left rank slowest,
//! right rank fastest).

use std::io::{Read, Write};
use std::path::Path;

use super::tensor::{Core, TTTensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TTF1";

pub fn to_bytes(x: &TTTensor) -> Vec<u8> {
    let d = x.d();
    let mut out = Vec::with_capacity(4 + 8 * (2 * d + 2) + 8 * x.storage());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(d as u64).to_le_bytes());
    for n in x.modes() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for r in x.ranks() {
        out.extend_from_slice(&(r as u64).to_le_bytes());
    }
    for c in x.cores() {
        for v in c.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!("truncated input at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Format(format!("value {v} does not fit in usize")))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<TTTensor> {
    let mut cur = Cursor { buf, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("missing TTF1 magic".into()));
    }
    let d = cur.u64()?;
    if d == 0 || d > 4096 {
        return Err(Error::Format(format!("implausible dimension count {d}")));
    }
    let modes = (0..d).map(|_| cur.u64()).collect::<Result<Vec<_>>>()?;
    let ranks = (0..=d).map(|_| cur.u64()).collect::<Result<Vec<_>>>()?;
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let len = ranks[k]
            .checked_mul(modes[k])
            .and_then(|v| v.checked_mul(ranks[k + 1]))
            .ok_or_else(|| Error::Format("core size overflows".into()))?;
        let bytes = cur.take(len.checked_mul(8).ok_or_else(|| Error::Format("core size overflows".into()))?)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        cores.push(Core::new(ranks[k], modes[k], ranks[k + 1], data).map_err(|e| Error::Format(e.to_string()))?);
    }
    if cur.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes", buf.len() - cur.pos)));
    }
    TTTensor::from_cores(cores).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_ttf1<W: Write>(x: &TTTensor, mut w: W) -> Result<()> {
    w.write_all(&to_bytes(x))?;
    Ok(())
}

pub fn read_ttf1<R: Read>(mut r: R) -> Result<TTTensor> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    from_bytes(&buf)
}

pub fn save(x: &TTTensor, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_bytes(x))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<TTTensor> {
    from_bytes(&std::fs::read(path)?)
}
