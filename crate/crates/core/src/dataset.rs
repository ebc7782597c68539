//! fvecs / bvecs / ivecs file I/O.
//!
//! All three formats store, per vector, a 4-byte little-endian dimension
//! followed by `dim` elements: 4-byte floats (fvecs), unsigned bytes (bvecs),
//! or 4-byte integers (ivecs, conventionally ground-truth ids).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Dataset, ElementType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Fvecs,
    Bvecs,
    Ivecs,
}

impl FileFormat {
    pub fn element_type(self) -> ElementType {
        match self {
            FileFormat::Fvecs => ElementType::F32,
            FileFormat::Bvecs => ElementType::U8,
            FileFormat::Ivecs => ElementType::I32,
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("fvecs") => Ok(FileFormat::Fvecs),
            Some("bvecs") => Ok(FileFormat::Bvecs),
            Some("ivecs") => Ok(FileFormat::Ivecs),
            other => Err(Error::usage(format!(
                "cannot infer dataset format from extension {other:?}; pass it explicitly"
            ))),
        }
    }
}

impl std::str::FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fvecs" => Ok(FileFormat::Fvecs),
            "bvecs" => Ok(FileFormat::Bvecs),
            "ivecs" => Ok(FileFormat::Ivecs),
            other => Err(Error::usage(format!("unknown dataset format {other:?}"))),
        }
    }
}

/// Loads a whole dataset file. Every record must carry the same dimension;
/// a truncated trailing record is a format error naming the byte offset.
pub fn load_dataset(path: impl AsRef<Path>, format: FileFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&bytes, format)
}

pub fn parse_dataset(bytes: &[u8], format: FileFormat) -> Result<Dataset> {
    let element_type = format.element_type();
    let width = element_type.width();
    let mut dim: Option<usize> = None;
    let mut data = Vec::new();
    let mut off = 0usize;
    while off < bytes.len() {
        if bytes.len() - off < 4 {
            return Err(Error::Format {
                offset: off as u64,
                reason: "truncated record: incomplete dimension header".into(),
            });
        }
        let d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        if d == 0 {
            return Err(Error::Format { offset: off as u64, reason: "record with dim 0".into() });
        }
        match dim {
            None => dim = Some(d),
            Some(prev) if prev != d => {
                return Err(Error::Format {
                    offset: off as u64,
                    reason: format!("inconsistent dim: expected {prev}, found {d}"),
                });
            }
            _ => {}
        }
        off += 4;
        let payload = d * width;
        if bytes.len() - off < payload {
            return Err(Error::Format {
                offset: off as u64,
                reason: format!(
                    "truncated record: need {payload} payload bytes, only {} remain",
                    bytes.len() - off
                ),
            });
        }
        data.extend_from_slice(&bytes[off..off + payload]);
        off += payload;
    }
    Dataset::from_raw(dim.unwrap_or(0), element_type, data)
}

/// Writes a dataset back out; `load_dataset(write_dataset(d))` is
/// byte-identical for well-formed files.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>, format: FileFormat) -> Result<()> {
    let path = path.as_ref();
    if format.element_type().width() != dataset.element_type().width() {
        return Err(Error::usage(format!(
            "dataset with {:?} elements cannot be written as {format:?}",
            dataset.element_type()
        )));
    }
    let mut out = Vec::with_capacity(dataset.count() * (4 + dataset.vector_width()));
    let dim = dataset.dim() as u32;
    for v in dataset.iter_bytes() {
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(v);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads an ivecs ground-truth file as one id row per query.
pub fn load_ivecs_ids(path: impl AsRef<Path>) -> Result<Vec<Vec<u32>>> {
    let ds = load_dataset(path, FileFormat::Ivecs)?;
    let mut rows = Vec::with_capacity(ds.count());
    for v in ds.iter_bytes() {
        rows.push(
            v.chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        );
    }
    Ok(rows)
}

/// Writes ground-truth id rows as ivecs.
pub fn write_ivecs_ids(rows: &[Vec<u32>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for row in rows {
        out.extend_from_slice(&(row.len() as u32).to_le_bytes());
        for id in row {
            out.extend_from_slice(&id.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
