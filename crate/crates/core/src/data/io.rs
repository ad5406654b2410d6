//! Dataset file formats.
//!
//! Binary (little-endian):
//!
//! ```text
//! magic        4 bytes "FNDS"
//! version      u32
//! num_classes  u32
//! samples      u64
//! rank         u32      (sample rank, batch axis excluded)
//! dims         rank × u32
//! features     samples × product(dims) × f64
//! labels       samples × u32
//! ```
//!
//! CSV: one sample per line, `label,f0,f1,...`, no header.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DATASET_MAGIC: [u8; 4] = *b"FNDS";
pub const DATASET_FORMAT_VERSION: u32 = 1;

pub(crate) fn to_bytes(d: &Dataset) -> Vec<u8> {
    let dims = d.sample_shape();
    let mut out = Vec::new();
    out.extend_from_slice(&DATASET_MAGIC);
    out.extend_from_slice(&DATASET_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(d.num_classes() as u32).to_le_bytes());
    out.extend_from_slice(&(d.len() as u64).to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &x in dims {
        out.extend_from_slice(&(x as u32).to_le_bytes());
    }
    for v in d.features().data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in d.labels() {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => Err(Error::Format {
                offset: self.pos as u64,
                detail: format!("truncated file while reading {what}"),
            }),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub(crate) fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != DATASET_MAGIC {
        return Err(Error::Format {
            offset: 0,
            detail: format!("bad magic {magic:?}"),
        });
    }
    let version = r.u32("version")?;
    if version != DATASET_FORMAT_VERSION {
        return Err(Error::Format {
            offset: 4,
            detail: format!("unsupported version {version}"),
        });
    }
    let num_classes = r.u32("class count")? as usize;
    let n = r.u64("sample count")? as usize;
    let rank = r.u32("rank")? as usize;
    let dims = (0..rank)
        .map(|_| r.u32("dimension").map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let numel: usize = dims.iter().product();
    let payload = n
        .checked_mul(numel)
        .and_then(|e| e.checked_mul(8))
        .ok_or_else(|| Error::Format {
            offset: r.pos as u64,
            detail: "feature payload size overflows".into(),
        })?;
    let features = r
        .take(payload, "features")?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let label_start = r.pos;
    let labels = r
        .take(n * 4, "labels")?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    if r.pos != bytes.len() {
        return Err(Error::Format {
            offset: r.pos as u64,
            detail: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    let mut shape = vec![n];
    shape.extend(dims);
    let features = Tensor::new(shape, features).map_err(|e| Error::Format {
        offset: 0,
        detail: e.to_string(),
    })?;
    Dataset::new(features, labels, num_classes).map_err(|e| Error::Format {
        offset: label_start as u64,
        detail: e.to_string(),
    })
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(dataset)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Reads `label,f0,f1,...` rows. The class count is `max label + 1` unless
/// `num_classes` is given.
pub fn load_csv(path: impl AsRef<Path>, num_classes: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut labels = Vec::new();
    let mut features = Vec::new();
    let mut width = None;
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let bad = |msg: String| Error::Data(format!("{} line {}: {msg}", path.display(), line + 1));
        let mut fields = row.iter();
        let label: usize = fields
            .next()
            .ok_or_else(|| bad("empty row".into()))?
            .parse()
            .map_err(|_| bad("label is not a non-negative integer".into()))?;
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|_| bad(format!("`{f}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(bad(format!("{} features, expected {w}", values.len())))
            }
            _ => {}
        }
        labels.push(label);
        features.extend(values);
    }
    let width = width.ok_or_else(|| Error::Data(format!("{} has no rows", path.display())))?;
    if width == 0 {
        return Err(Error::Data(format!("{} rows carry no features", path.display())));
    }
    let classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    Dataset::new(Tensor::new(vec![labels.len(), width], features)?, labels, classes)
}
