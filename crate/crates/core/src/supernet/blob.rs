//! Flat, versioned serialization of a supernet's `w` and `α`.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic            4 bytes  "FNPB"
//! format_version   u32
//! record_count     u32
//! record*:
//!   name_len       u32
//!   name           name_len bytes, UTF-8
//!   rank           u32
//!   dims           rank × u32
//!   payload        product(dims) × f64
//! ```
//!
//! Weights come first in slot order, then one `edge{e}.alpha` record per
//! edge when the network is searchable.

use super::Supernet;
use crate::error::{Error, Result};

pub const BLOB_MAGIC: [u8; 4] = *b"FNPB";
pub const BLOB_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterBlob {
    pub records: Vec<Record>,
}

impl ParameterBlob {
    pub fn new(records: Vec<Record>) -> Self {
        Self { records }
    }

    pub fn element_count(&self) -> usize {
        self.records.iter().map(|r| r.data.len()).sum()
    }

    /// Encoded size in bytes.
    pub fn byte_len(&self) -> usize {
        12 + self
            .records
            .iter()
            .map(|r| 4 + r.name.len() + 4 + 4 * r.shape.len() + 8 * r.data.len())
            .sum::<usize>()
    }

    pub fn get(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Checks that `other` has the same names, shapes and order, naming
    /// the first divergent record otherwise.
    pub fn check_layout(&self, other: &ParameterBlob) -> Result<()> {
        for (i, (a, b)) in self.records.iter().zip(&other.records).enumerate() {
            if a.name != b.name || a.shape != b.shape {
                return Err(Error::Serialization(format!(
                    "record {i} differs: expected `{}` {:?}, found `{}` {:?}",
                    a.name, a.shape, b.name, b.shape
                )));
            }
        }
        if self.records.len() != other.records.len() {
            let i = self.records.len().min(other.records.len());
            let name = self
                .records
                .get(i)
                .or_else(|| other.records.get(i))
                .map(|r| r.name.as_str())
                .unwrap_or("");
            return Err(Error::Serialization(format!(
                "record count {} vs {}; first divergent record {i} `{name}`",
                self.records.len(),
                other.records.len()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_len());
        out.extend_from_slice(&BLOB_MAGIC);
        out.extend_from_slice(&BLOB_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.extend_from_slice(&(r.shape.len() as u32).to_le_bytes());
            for &d in &r.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &r.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != BLOB_MAGIC {
            return Err(Error::Serialization(format!("bad magic {magic:?}")));
        }
        let version = cur.u32("format version")?;
        if version != BLOB_FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "format version {version}, expected {BLOB_FORMAT_VERSION}"
            )));
        }
        let count = cur.u32("record count")? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            let len = cur.u32("name length")? as usize;
            let name = String::from_utf8(cur.take(len, "name")?.to_vec())
                .map_err(|_| Error::Serialization(format!("record {i}: name is not UTF-8")))?;
            let rank = cur.u32("rank")? as usize;
            let shape = (0..rank)
                .map(|_| cur.u32("dimension").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let payload = cur.take(numel * 8, "payload")?;
            let data = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            records.push(Record { name, shape, data });
        }
        if cur.pos != bytes.len() {
            return Err(Error::Serialization(format!(
                "{} trailing bytes after record {count}",
                bytes.len() - cur.pos
            )));
        }
        Ok(Self { records })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Serialization(format!("truncated blob reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

impl Supernet {
    /// Snapshot of all weights (and α when searchable) in canonical order.
    pub fn flatten_params(&self) -> ParameterBlob {
        let mut records: Vec<Record> = self
            .params()
            .map(|p| Record {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
                data: p.tensor.data().to_vec(),
            })
            .collect();
        if self.is_searchable() {
            records.extend(self.edges().iter().enumerate().map(|(e, edge)| Record {
                name: format!("edge{e}.alpha"),
                shape: vec![edge.len()],
                data: edge.alpha().to_vec(),
            }));
        }
        ParameterBlob { records }
    }

    /// Loads a blob produced by a network of the same configuration.
    pub fn unflatten_params(&mut self, blob: &ParameterBlob) -> Result<()> {
        let layout = self.flatten_params();
        layout.check_layout(blob)?;
        let mut records = blob.records.iter();
        for p in self.params_mut() {
            let r = records.next().expect("layout checked");
            p.tensor.assign(&r.data)?;
        }
        if self.is_searchable() {
            for edge in self.edges_mut() {
                let r = records.next().expect("layout checked");
                edge.set_alpha(&r.data)?;
            }
        }
        Ok(())
    }
}

pub fn flatten_params(net: &Supernet) -> ParameterBlob {
    net.flatten_params()
}

pub fn unflatten_params(net: &mut Supernet, blob: &ParameterBlob) -> Result<()> {
    net.unflatten_params(blob)
}
