//! Binary checkpoint container.
//!
//! ```text
//! magic    b"AVCK"
//! version  u32
//! kind     u32 length + UTF-8
//! meta     u32 count, then (u32 length + UTF-8 key, u32 length + UTF-8 value)*
//! tensors  u32 count, then (u32 length + UTF-8 name, u32 rows, u32 cols, rows·cols f64)*
//! ```
//!
//! All integers and reals are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::params::Params;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AVCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Matrix)>,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("checkpoint string is not UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Checkpoint { kind: kind.into(), meta: BTreeMap::new(), tensors: Vec::new() }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks {key:?}")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.parse().map_err(|_| Error::Format(format!("checkpoint field {key:?} is malformed")))
    }

    pub fn add_params(&mut self, params: &impl Params) {
        params.visit("", &mut |name, m| self.tensors.push((name, m.clone())));
    }

    /// Copies tensors into `params` by name; names and shapes must match exactly.
    pub fn load_params(&self, params: &mut impl Params) -> Result<()> {
        let by_name: BTreeMap<&str, &Matrix> = self.tensors.iter().map(|(n, m)| (n.as_str(), m)).collect();
        let mut err = None;
        let mut used = 0;
        params.visit_mut("", &mut |name, m| {
            match by_name.get(name.as_str()) {
                Some(src) if src.shape() == m.shape() => {
                    m.data_mut().copy_from_slice(src.data());
                    used += 1;
                }
                Some(src) => {
                    err.get_or_insert(Error::Format(format!(
                        "tensor {name}: shape {:?} does not match model {:?}",
                        src.shape(),
                        m.shape()
                    )));
                }
                None => {
                    err.get_or_insert(Error::Format(format!("checkpoint lacks tensor {name}")));
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if used != self.tensors.len() {
            return Err(Error::Format("checkpoint has tensors the model does not use".into()));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, m) in &self.tensors {
            put_str(&mut out, name);
            out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let kind = r.string()?;
        let mut meta = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            meta.insert(k, r.string()?);
        }
        let count = r.u32()?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name = r.string()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let raw = r.take(rows * cols * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            tensors.push((name, Matrix::from_vec(rows, cols, data)?));
        }
        if r.at != bytes.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Checkpoint { kind, meta, tensors })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Lstm;
    use crate::numerics::seeded_rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = seeded_rng(5);
        let lstm = Lstm::new(3, 4, &mut rng);
        let mut ck = Checkpoint::new("lstm");
        ck.set("alphabet", "ab c");
        ck.add_params(&lstm);
        let back = Checkpoint::decode(&ck.encode()).unwrap();
        assert_eq!(back, ck);
        let mut other = Lstm::new(3, 4, &mut rng);
        back.load_params(&mut other).unwrap();
        assert_eq!(other, lstm);
        assert_eq!(back.encode(), ck.encode());
    }

    #[test]
    fn shape_and_magic_errors() {
        let mut rng = seeded_rng(5);
        let mut ck = Checkpoint::new("lstm");
        ck.add_params(&Lstm::new(3, 4, &mut rng));
        let mut wrong = Lstm::new(2, 4, &mut rng);
        assert!(ck.load_params(&mut wrong).is_err());
        let mut bytes = ck.encode();
        bytes[0] = b'X';
        assert!(Checkpoint::decode(&bytes).is_err());
        let bytes = ck.encode();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 3]).is_err());
    }
}
