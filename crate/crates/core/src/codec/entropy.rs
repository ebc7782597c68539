//! Byte histograms and Shannon entropy.

use crate::error::{Error, Result};

/// Shannon entropy in bits per byte over the byte histogram of `data`.
/// Empty input has entropy 0; `0 * log(0)` is taken as 0.
pub fn byte_entropy(data: &[u8]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut counts = [0u64; 256];
    for &b in data {
        counts[b as usize] += 1;
    }
    entropy_of_counts(&counts, data.len() as u64)
}

pub(crate) fn entropy_of_counts(counts: &[u64; 256], total: u64) -> f64 {
    let n = total as f64;
    let mut h = 0.0;
    for &c in counts.iter() {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

/// Exact byte histogram of a segment's payload; this is the only compression
/// state persisted per segment (the Huffman table is rebuilt from it).
#[derive(Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    pub counts: [u64; 256],
}

pub const FREQUENCY_TABLE_BYTES: usize = 256 * 8;

impl FrequencyTable {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add_bytes(&mut self, data: &[u8]) {
        for &b in data {
            self.counts[b as usize] += 1;
        }
    }

    pub fn merge(&mut self, other: &FrequencyTable) {
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
    }

    pub fn entropy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        entropy_of_counts(&self.counts, total)
    }

    /// 256 little-endian u64 counters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FREQUENCY_TABLE_BYTES);
        for c in self.counts.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != FREQUENCY_TABLE_BYTES {
            return Err(Error::Format {
                offset: 0,
                reason: format!(
                    "frequency table must be {FREQUENCY_TABLE_BYTES} bytes, got {}",
                    bytes.len()
                ),
            });
        }
        let mut counts = [0u64; 256];
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            counts[i] = u64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(FrequencyTable { counts })
    }
}

impl std::fmt::Debug for FrequencyTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let nonzero = self.counts.iter().filter(|&&c| c > 0).count();
        write!(f, "FrequencyTable {{ total: {}, symbols: {} }}", self.total(), nonzero)
    }
}

/// Builds the exact histogram of a nonempty stream.
pub fn build_frequency_table(stream: &[u8]) -> Result<FrequencyTable> {
    if stream.is_empty() {
        return Err(Error::usage("cannot build a frequency table from an empty stream"));
    }
    let mut t = FrequencyTable { counts: [0; 256] };
    t.add_bytes(stream);
    Ok(t)
}
