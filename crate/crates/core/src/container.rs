//! The flat binary weight container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    4 bytes  "RFDD"
//! version  u32      1
//! count    u32      number of entries
//! entry × count:
//!   name_len u16
//!   name     name_len bytes of UTF-8
//!   ndim     u8
//!   dims     ndim × u32
//!   data     product(dims) × f32
//! ```
//!
//! Entries are written in sorted-name order. Trailing bytes are rejected.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::weights::{Param, WeightStore};

pub const MAGIC: [u8; 4] = *b"RFDD";
pub const VERSION: u32 = 1;

pub fn encode_weights(store: &WeightStore) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + store.param_count() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(store.len())
        .map_err(|_| Error::contract("weight store has more than u32::MAX entries"))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, param) in store.iter() {
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::contract(format!("weight name `{name}` exceeds 65535 bytes")))?;
        let ndim = u8::try_from(param.dims().len()).map_err(|_| {
            Error::contract(format!("weight `{name}` has more than 255 dimensions"))
        })?;
        if let Some(v) = param.data().iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "weight `{name}` holds non-finite value {v}"
            )));
        }
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(ndim);
        for &d in param.dims() {
            let d = u32::try_from(d)
                .map_err(|_| Error::contract(format!("weight `{name}` dimension {d} too large")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in param.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos,
                message: format!(
                    "truncated {what}: need {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<WeightStore> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {magic:?}, expected \"RFDD\""),
        });
    }
    let version_at = r.pos;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format {
            offset: version_at,
            message: format!("unsupported version {version}, expected {VERSION}"),
        });
    }
    let count = r.u32("entry count")?;
    let mut store = WeightStore::new();
    for _ in 0..count {
        let entry_at = r.pos;
        let name_len = r.u16("name length")? as usize;
        let name_at = r.pos;
        let name = std::str::from_utf8(r.take(name_len, "name")?).map_err(|e| Error::Format {
            offset: name_at + e.valid_up_to(),
            message: "weight name is not valid UTF-8".into(),
        })?;
        if store.contains(name) {
            return Err(Error::Format {
                offset: entry_at,
                message: format!("duplicate weight name `{name}`"),
            });
        }
        let ndim = r.u8("ndim")? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32("dimension")? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format {
                offset: name_at + name_len,
                message: format!("dimensions {dims:?} overflow"),
            })?;
        let data = r
            .take(n, "tensor data")?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        store.insert(name, Param::new(dims, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format {
            offset: r.pos,
            message: format!("{} trailing bytes after last entry", bytes.len() - r.pos),
        });
    }
    Ok(store)
}

/// Writes `bytes` to `path` through a temporary file in the same directory and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_weights(store)?;
    write_atomic(path.as_ref(), &bytes)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}
