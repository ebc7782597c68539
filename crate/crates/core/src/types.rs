//! Core vector containers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar type of a vector's elements.
///
/// `I32` exists for ivecs ground-truth files; vector stores accept only the
/// first three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementType {
    U8,
    I8,
    F32,
    I32,
}

impl ElementType {
    /// Width of one element in bytes.
    pub const fn width(self) -> usize {
        match self {
            ElementType::U8 | ElementType::I8 => 1,
            ElementType::F32 | ElementType::I32 => 4,
        }
    }

    /// Decodes raw little-endian element bytes into f32 values.
    pub fn decode_f32(self, bytes: &[u8], out: &mut Vec<f32>) {
        match self {
            ElementType::U8 => out.extend(bytes.iter().map(|&b| b as f32)),
            ElementType::I8 => out.extend(bytes.iter().map(|&b| b as i8 as f32)),
            ElementType::F32 => out.extend(
                bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
            ),
            ElementType::I32 => out.extend(
                bytes.chunks_exact(4).map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f32),
            ),
        }
    }
}

impl std::str::FromStr for ElementType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u8" | "uint8" => Ok(ElementType::U8),
            "i8" | "int8" => Ok(ElementType::I8),
            "f32" | "fp32" | "float" => Ok(ElementType::F32),
            "i32" | "int32" => Ok(ElementType::I32),
            other => Err(Error::usage(format!("unknown element type {other:?}"))),
        }
    }
}

/// One vector with a stable identifier. `data` is the raw little-endian
/// element payload of exactly `dim * element_type.width()` bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorRecord {
    pub id: u32,
    pub element_type: ElementType,
    pub data: Vec<u8>,
}

impl VectorRecord {
    pub fn new(id: u32, element_type: ElementType, data: Vec<u8>) -> Result<Self> {
        if data.is_empty() || data.len() % element_type.width() != 0 {
            return Err(Error::usage(format!(
                "vector payload of {} bytes does not hold whole {element_type:?} elements",
                data.len()
            )));
        }
        Ok(VectorRecord { id, element_type, data })
    }

    pub fn dim(&self) -> usize {
        self.data.len() / self.element_type.width()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.dim());
        self.element_type.decode_f32(&self.data, &mut out);
        out
    }
}

/// A dense collection of equally shaped vectors; record `i` has id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    element_type: ElementType,
    data: Vec<u8>,
}

impl Dataset {
    pub fn new(dim: usize, element_type: ElementType) -> Self {
        Dataset { dim, element_type, data: Vec::new() }
    }

    pub fn from_raw(dim: usize, element_type: ElementType, data: Vec<u8>) -> Result<Self> {
        let width = dim * element_type.width();
        if width == 0 && !data.is_empty() {
            return Err(Error::usage("zero-dimensional dataset with nonempty payload"));
        }
        if width != 0 && data.len() % width != 0 {
            return Err(Error::usage(format!(
                "payload of {} bytes is not a multiple of the {width}-byte vector size",
                data.len()
            )));
        }
        Ok(Dataset { dim, element_type, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn element_type(&self) -> ElementType {
        self.element_type
    }

    /// Size of one full-precision vector in bytes (`V`).
    pub fn vector_width(&self) -> usize {
        self.dim * self.element_type.width()
    }

    pub fn count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.vector_width()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn raw(&self) -> &[u8] {
        &self.data
    }

    pub fn vector_bytes(&self, id: u32) -> &[u8] {
        let w = self.vector_width();
        let start = id as usize * w;
        &self.data[start..start + w]
    }

    pub fn vector_f32(&self, id: u32) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.dim);
        self.element_type.decode_f32(self.vector_bytes(id), &mut out);
        out
    }

    pub fn record(&self, id: u32) -> VectorRecord {
        VectorRecord {
            id,
            element_type: self.element_type,
            data: self.vector_bytes(id).to_vec(),
        }
    }

    pub fn push_bytes(&mut self, bytes: &[u8]) -> Result<u32> {
        if bytes.len() != self.vector_width() {
            return Err(Error::usage(format!(
                "expected {} bytes per vector, got {}",
                self.vector_width(),
                bytes.len()
            )));
        }
        let id = self.count() as u32;
        self.data.extend_from_slice(bytes);
        Ok(id)
    }

    pub fn iter_bytes(&self) -> impl Iterator<Item = &[u8]> {
        let w = self.vector_width();
        self.data.chunks_exact(w.max(1))
    }

    /// Decodes every vector into one flat f32 row-major matrix.
    pub fn to_f32_matrix(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.count() * self.dim);
        for v in self.iter_bytes() {
            self.element_type.decode_f32(v, &mut out);
        }
        out
    }

    /// Dataset holding the first `n` records.
    pub fn prefix(&self, n: usize) -> Dataset {
        let w = self.vector_width();
        Dataset {
            dim: self.dim,
            element_type: self.element_type,
            data: self.data[..n * w].to_vec(),
        }
    }
}

/// Exact nearest-neighbor answers: one row per query, `(id, distance)` pairs
/// sorted ascending by distance.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub rows: Vec<Vec<(u32, f32)>>,
}

impl GroundTruth {
    pub fn from_id_rows(rows: Vec<Vec<u32>>) -> Self {
        GroundTruth {
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(|id| (id, 0.0)).collect())
                .collect(),
        }
    }

    pub fn ids(&self, query: usize) -> Vec<u32> {
        self.rows[query].iter().map(|&(id, _)| id).collect()
    }
}

/// The four dataset compressibility metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub global_dispersion: f64,
    pub dimensional_dispersion: f64,
    /// Shannon entropy (bits/byte) over the whole raw payload.
    pub global_entropy: f64,
    /// Mean per-byte-position Shannon entropy (bits/byte).
    pub columnar_entropy: f64,
}
