//! Flat binary container for parameter sets.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "ADMETPRM"
//! version    u32      1
//! schema     u64      caller-supplied schema hash
//! count      u32      number of parameters
//! name table count × { name_len u32, name utf-8, rows u32, cols u32 }
//! payload    for each parameter, rows × cols f64, row-major
//! ```

use thiserror::Error;

use super::{ParamSet, Tensor};

pub const MAGIC: &[u8; 8] = b"ADMETPRM";
pub const VERSION: u32 = 1;
const MAX_PARAMS: usize = 1 << 16;
const MAX_NAME: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContainerError {
    #[error("not a parameter container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("container truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("invalid parameter name at byte {0}")]
    InvalidName(usize),
    #[error("duplicate parameter name {0}")]
    DuplicateName(String),
    #[error("container declares {0} parameters, above the limit")]
    TooManyParams(usize),
    #[error("non-finite weight in parameter {0}")]
    NonFinite(String),
    #[error("schema hash {found:#018x} does not match expected {expected:#018x}")]
    SchemaMismatch { expected: u64, found: u64 },
}

pub fn encode(params: &ParamSet, schema_hash: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + params.scalar_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&schema_hash.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(p.value.cols() as u32).to_le_bytes());
    }
    for p in params.iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(ContainerError::Truncated(self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Decodes a container, returning the parameters and the stored schema hash.
pub fn decode(bytes: &[u8]) -> Result<(ParamSet, u64), ContainerError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len()).map_err(|_| ContainerError::BadMagic)? != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ContainerError::UnsupportedVersion(version));
    }
    let schema = r.u64()?;
    let count = r.u32()? as usize;
    if count > MAX_PARAMS {
        return Err(ContainerError::TooManyParams(count));
    }
    let mut table = Vec::with_capacity(count.min(1024));
    let mut names = std::collections::BTreeSet::new();
    let mut total: usize = 0;
    for _ in 0..count {
        let at = r.pos;
        let len = r.u32()? as usize;
        if len == 0 || len > MAX_NAME {
            return Err(ContainerError::InvalidName(at));
        }
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| ContainerError::InvalidName(at))?
            .to_string();
        if !names.insert(name.clone()) {
            return Err(ContainerError::DuplicateName(name));
        }
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or(ContainerError::Truncated(r.pos))?;
        total = total
            .checked_add(n)
            .ok_or(ContainerError::Truncated(r.pos))?;
        table.push((name, rows, cols));
    }
    let remaining = bytes.len() - r.pos;
    if total.checked_mul(8).is_none_or(|b| b > remaining) {
        return Err(ContainerError::Truncated(bytes.len()));
    }
    let mut params = ParamSet::new();
    for (name, rows, cols) in table {
        let raw = r.take(rows * cols * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ContainerError::NonFinite(name));
        }
        let t = Tensor::from_vec(rows, cols, data).expect("length checked");
        params.push(name, t);
    }
    if r.pos != bytes.len() {
        return Err(ContainerError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok((params, schema))
}

/// Decodes and checks the schema hash.
pub fn decode_expecting(bytes: &[u8], expected: u64) -> Result<ParamSet, ContainerError> {
    let (params, found) = decode(bytes)?;
    if found != expected {
        return Err(ContainerError::SchemaMismatch { expected, found });
    }
    Ok(params)
}
