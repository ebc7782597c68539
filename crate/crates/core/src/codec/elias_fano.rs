//! Elias-Fano encoding of nondecreasing id sequences.
//!
//! Each id is split into a fixed-width low part and a high part; the high
//! parts are stored as a unary-gap bitmap (the i-th set bit at position
//! `high_i + i`). The payload never exceeds the worst-case bound
//! `2R + R * ceil(log2(N / R))` bits.

use crate::codec::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};

/// A compressed sorted neighbor list: `count` ids drawn from `[0, universe)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedNeighborList {
    pub count: u32,
    pub universe: u32,
    pub lower_width: u8,
    low_bits: Vec<u8>,
    low_len_bits: usize,
    high_bits: Vec<u8>,
    high_len_bits: usize,
}

/// Standard Elias-Fano lower-bit width: `max(0, floor(log2(N / R)))`.
pub fn lower_width(count: u32, universe: u32) -> u8 {
    if count == 0 || universe == 0 {
        return 0;
    }
    let ratio = universe as u64 / count as u64;
    if ratio <= 1 {
        0
    } else {
        ratio.ilog2() as u8
    }
}

/// Worst-case payload size in bits for `r` ids below `n`:
/// `2r + r * ceil(log2(n / r))`.
pub fn ef_worst_case_bits(r: u64, n: u64) -> Result<u64> {
    if r < 1 || r > n {
        return Err(Error::usage(format!("ef_worst_case_bits needs 1 <= R <= N, got R={r} N={n}")));
    }
    // smallest k with r * 2^k >= n
    let mut k = 0u64;
    while ((r as u128) << k) < n as u128 {
        k += 1;
    }
    Ok(2 * r + r * k)
}

/// Encodes a nondecreasing id sequence; every id must be `< universe`.
pub fn ef_encode(sorted_ids: &[u32], universe: u32) -> Result<EncodedNeighborList> {
    if sorted_ids.is_empty() {
        return Err(Error::usage("cannot Elias-Fano encode an empty list"));
    }
    let mut prev = 0u32;
    for (i, &id) in sorted_ids.iter().enumerate() {
        if id >= universe {
            return Err(Error::usage(format!("id {id} is outside the universe {universe}")));
        }
        if i > 0 && id < prev {
            return Err(Error::usage(format!("ids must be nondecreasing: {id} after {prev}")));
        }
        prev = id;
    }

    let count = sorted_ids.len() as u32;
    let width = lower_width(count, universe);
    let mut low = BitWriter::with_capacity(sorted_ids.len() * width as usize);
    let mut high = BitWriter::new();
    let mut prev_high = 0u64;
    for &id in sorted_ids {
        if width > 0 {
            low.write_bits((id as u64) & ((1u64 << width) - 1), width as usize);
        }
        let h = (id as u64) >> width;
        for _ in prev_high..h {
            high.write_bit(false);
        }
        high.write_bit(true);
        prev_high = h;
    }
    let (low_bits, low_len_bits) = low.into_parts();
    let (high_bits, high_len_bits) = high.into_parts();
    let enc = EncodedNeighborList {
        count,
        universe,
        lower_width: width,
        low_bits,
        low_len_bits,
        high_bits,
        high_len_bits,
    };
    debug_assert!(
        count as u64 > universe as u64
            || enc.payload_bits() <= ef_worst_case_bits(count as u64, universe as u64).unwrap()
    );
    Ok(enc)
}

/// Decodes back to the original id sequence.
pub fn ef_decode(enc: &EncodedNeighborList) -> Vec<u32> {
    let mut out = Vec::with_capacity(enc.count as usize);
    let mut low = BitReader::new(&enc.low_bits, enc.low_len_bits);
    let mut high = BitReader::new(&enc.high_bits, enc.high_len_bits);
    let mut zeros = 0u64;
    while out.len() < enc.count as usize {
        match high.read_bit() {
            Some(true) => {
                let l = if enc.lower_width > 0 {
                    low.read_bits(enc.lower_width as usize).unwrap_or(0)
                } else {
                    0
                };
                out.push(((zeros << enc.lower_width) | l) as u32);
            }
            Some(false) => zeros += 1,
            None => break,
        }
    }
    out
}

impl EncodedNeighborList {
    /// Logical payload size (low bits + high bitmap), excluding headers and
    /// byte padding. This is the quantity bounded by [`ef_worst_case_bits`].
    pub fn payload_bits(&self) -> u64 {
        (self.low_len_bits + self.high_len_bits) as u64
    }

    /// Disk form: `count: u16 | lower_width: u8 | low bits | high bits`, the
    /// two bit arrays each padded to a byte boundary.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(3 + self.low_bits.len() + self.high_bits.len());
        out.extend_from_slice(&(self.count as u16).to_le_bytes());
        out.push(self.lower_width);
        out.extend_from_slice(&self.low_bits);
        out.extend_from_slice(&self.high_bits);
        out
    }

    pub fn from_bytes(bytes: &[u8], universe: u32) -> Result<Self> {
        if bytes.len() < 3 {
            return Err(Error::Corruption {
                block: 0,
                reason: format!("neighbor list entry of {} bytes is too short", bytes.len()),
            });
        }
        let count = u16::from_le_bytes([bytes[0], bytes[1]]) as u32;
        let width = bytes[2];
        if count == 0 {
            return Ok(empty(universe));
        }
        if width != lower_width(count, universe) {
            return Err(Error::Corruption {
                block: 0,
                reason: format!("lower width {width} inconsistent with R={count} N={universe}"),
            });
        }
        let low_bytes = ((count as usize) * width as usize).div_ceil(8);
        if bytes.len() < 3 + low_bytes {
            return Err(Error::Corruption {
                block: 0,
                reason: "neighbor list entry truncated in low bits".into(),
            });
        }
        let high = &bytes[3 + low_bytes..];
        Ok(EncodedNeighborList {
            count,
            universe,
            lower_width: width,
            low_bits: bytes[3..3 + low_bytes].to_vec(),
            low_len_bits: count as usize * width as usize,
            high_bits: high.to_vec(),
            high_len_bits: high.len() * 8,
        })
    }

    /// Cache form: `count: u16` followed by low and high bits packed
    /// contiguously (no per-array padding), so the entry always fits in
    /// `2 + ceil(worst_case_bits / 8)` bytes.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut w = BitWriter::with_capacity(self.low_len_bits + self.high_len_bits);
        let mut low = BitReader::new(&self.low_bits, self.low_len_bits);
        while let Some(b) = low.read_bit() {
            w.write_bit(b);
        }
        let mut high = BitReader::new(&self.high_bits, self.high_len_bits);
        while let Some(b) = high.read_bit() {
            w.write_bit(b);
        }
        let (bits, _) = w.into_parts();
        let mut out = Vec::with_capacity(2 + bits.len());
        out.extend_from_slice(&(self.count as u16).to_le_bytes());
        out.extend_from_slice(&bits);
        out
    }

    pub fn from_packed(entry: &[u8], universe: u32) -> Result<Self> {
        if entry.len() < 2 {
            return Err(Error::Corruption { block: 0, reason: "packed entry too short".into() });
        }
        let count = u16::from_le_bytes([entry[0], entry[1]]) as u32;
        if count == 0 {
            return Ok(empty(universe));
        }
        let width = lower_width(count, universe);
        let low_len_bits = count as usize * width as usize;
        let payload = &entry[2..];
        if payload.len() * 8 < low_len_bits {
            return Err(Error::Corruption { block: 0, reason: "packed entry truncated".into() });
        }
        let mut r = BitReader::from_bytes(payload);
        let mut low = BitWriter::with_capacity(low_len_bits);
        for _ in 0..low_len_bits {
            low.write_bit(r.read_bit().unwrap());
        }
        let mut high = BitWriter::with_capacity(r.remaining_bits());
        while let Some(b) = r.read_bit() {
            high.write_bit(b);
        }
        let (low_bits, low_len_bits) = low.into_parts();
        let (high_bits, high_len_bits) = high.into_parts();
        Ok(EncodedNeighborList {
            count,
            universe,
            lower_width: width,
            low_bits,
            low_len_bits,
            high_bits,
            high_len_bits,
        })
    }
}

/// An explicitly empty list (a valid layout state for vertices whose list was
/// dropped); `ef_encode` itself rejects empty input.
pub fn empty(universe: u32) -> EncodedNeighborList {
    EncodedNeighborList {
        count: 0,
        universe,
        lower_width: 0,
        low_bits: Vec::new(),
        low_len_bits: 0,
        high_bits: Vec::new(),
        high_len_bits: 0,
    }
}
