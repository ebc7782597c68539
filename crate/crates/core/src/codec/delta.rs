//! Base-vector construction and XOR-delta transforms.
//!
//! A chunk's base vector holds the most frequent byte at each position;
//! XOR-ing every vector against it concentrates the byte distribution when
//! the data has per-position structure. The transform decision samples a
//! prefix of the chunk and keeps the raw form unless the delta strictly
//! lowers entropy.

use crate::codec::entropy::byte_entropy;
use crate::error::{Error, Result};

/// Per-chunk transform decision; `base` is present iff `use_delta`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkTransform {
    pub use_delta: bool,
    pub base: Option<Vec<u8>>,
}

impl ChunkTransform {
    pub fn raw() -> Self {
        ChunkTransform { use_delta: false, base: None }
    }
}

/// Most frequent byte value per position; ties go to the smaller byte value.
pub fn build_base_vector(vectors: &[&[u8]]) -> Result<Vec<u8>> {
    let Some(first) = vectors.first() else {
        return Err(Error::usage("cannot build a base vector from an empty list"));
    };
    let width = first.len();
    if vectors.iter().any(|v| v.len() != width) {
        return Err(Error::usage("base vector inputs must share one length"));
    }
    let mut counts = vec![0u32; width * 256];
    for v in vectors {
        for (p, &b) in v.iter().enumerate() {
            counts[p * 256 + b as usize] += 1;
        }
    }
    let mut base = vec![0u8; width];
    for p in 0..width {
        let row = &counts[p * 256..(p + 1) * 256];
        let mut best = 0usize;
        for (b, &c) in row.iter().enumerate() {
            if c > row[best] {
                best = b;
            }
        }
        base[p] = best as u8;
    }
    Ok(base)
}

/// Elementwise XOR; self-inverse.
pub fn xor_transform(data: &[u8], base: &[u8]) -> Result<Vec<u8>> {
    if data.len() != base.len() {
        return Err(Error::usage(format!(
            "xor_transform length mismatch: {} vs {}",
            data.len(),
            base.len()
        )));
    }
    Ok(data.iter().zip(base).map(|(a, b)| a ^ b).collect())
}

pub fn xor_in_place(data: &mut [u8], base: &[u8]) {
    debug_assert_eq!(data.len(), base.len());
    for (a, b) in data.iter_mut().zip(base) {
        *a ^= b;
    }
}

/// Samples the first `ceil(sample_fraction * n)` vectors (at least one),
/// builds a candidate base from the sample, and chooses the delta transform
/// iff the sample's XOR-delta entropy is strictly below its raw entropy.
pub fn choose_chunk_transform(
    chunk_vectors: &[&[u8]],
    sample_fraction: f64,
) -> Result<ChunkTransform> {
    if chunk_vectors.is_empty() {
        return Err(Error::usage("cannot choose a transform for an empty chunk"));
    }
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::usage(format!("sample fraction {sample_fraction} not in (0, 1]")));
    }
    let n = chunk_vectors.len();
    let sample_n = ((sample_fraction * n as f64).ceil() as usize).clamp(1, n);
    let sample = &chunk_vectors[..sample_n];

    let base = build_base_vector(sample)?;
    let mut raw = Vec::with_capacity(sample_n * sample[0].len());
    let mut delta = Vec::with_capacity(raw.capacity());
    for v in sample {
        raw.extend_from_slice(v);
        delta.extend(v.iter().zip(&base).map(|(a, b)| a ^ b));
    }
    if byte_entropy(&delta) < byte_entropy(&raw) {
        Ok(ChunkTransform { use_delta: true, base: Some(base) })
    } else {
        Ok(ChunkTransform::raw())
    }
}
