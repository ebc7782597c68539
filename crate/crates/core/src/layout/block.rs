//! Fixed 4,096-byte disk blocks.
//!
//! A block is self-describing: a u16 item count, then one u16 cumulative
//! payload end-offset per item (high bit flags a raw, non-entropy-coded
//! item), then the concatenated payloads. No item ever spans a block
//! boundary.

use crate::error::{Error, Result};

pub const BLOCK_SIZE: usize = 4096;
pub const RAW_FLAG: u16 = 0x8000;
pub const OFFSET_MASK: u16 = 0x7FFF;

/// Accumulates items into one block image.
#[derive(Debug, Default)]
pub struct BlockBuilder {
    entries: Vec<u16>,
    payload: Vec<u8>,
}

impl BlockBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self) -> usize {
        self.entries.len()
    }

    fn used(&self) -> usize {
        2 + 2 * self.entries.len() + self.payload.len()
    }

    /// Whether one more item of `len` bytes still fits.
    pub fn fits(&self, len: usize) -> bool {
        self.used() + 2 + len <= BLOCK_SIZE
    }

    /// Appends an item; caller must have checked [`fits`](Self::fits).
    pub fn push(&mut self, item: &[u8], raw: bool) {
        debug_assert!(self.fits(item.len()));
        self.payload.extend_from_slice(item);
        let end = self.payload.len() as u16;
        debug_assert!(end <= OFFSET_MASK);
        self.entries.push(if raw { end | RAW_FLAG } else { end });
    }

    /// Serializes and resets the builder, returning a full zero-padded block.
    pub fn finish(&mut self) -> [u8; BLOCK_SIZE] {
        let mut out = [0u8; BLOCK_SIZE];
        out[..2].copy_from_slice(&(self.entries.len() as u16).to_le_bytes());
        for (i, e) in self.entries.iter().enumerate() {
            out[2 + 2 * i..4 + 2 * i].copy_from_slice(&e.to_le_bytes());
        }
        let start = 2 + 2 * self.entries.len();
        out[start..start + self.payload.len()].copy_from_slice(&self.payload);
        self.entries.clear();
        self.payload.clear();
        out
    }
}

/// Read-only view over one block image; parses standalone from its header.
pub struct BlockView<'a> {
    bytes: &'a [u8],
    /// Absolute block index in the containing file, for error reporting.
    pub block_index: u64,
}

impl<'a> BlockView<'a> {
    pub fn new(bytes: &'a [u8], block_index: u64) -> Result<Self> {
        if bytes.len() != BLOCK_SIZE {
            return Err(Error::Corruption {
                block: block_index,
                reason: format!("block read returned {} bytes", bytes.len()),
            });
        }
        let v = BlockView { bytes, block_index };
        let count = v.count();
        if 2 + 2 * count > BLOCK_SIZE {
            return Err(Error::Corruption {
                block: block_index,
                reason: format!("implausible item count {count}"),
            });
        }
        Ok(v)
    }

    pub fn count(&self) -> usize {
        u16::from_le_bytes([self.bytes[0], self.bytes[1]]) as usize
    }

    fn entry(&self, idx: usize) -> u16 {
        u16::from_le_bytes([self.bytes[2 + 2 * idx], self.bytes[3 + 2 * idx]])
    }

    /// Payload slice and raw-fallback flag of item `idx`.
    pub fn item(&self, idx: usize) -> Result<(&'a [u8], bool)> {
        let count = self.count();
        if idx >= count {
            return Err(Error::Corruption {
                block: self.block_index,
                reason: format!("item {idx} out of range ({count} items)"),
            });
        }
        let start = if idx == 0 { 0 } else { (self.entry(idx - 1) & OFFSET_MASK) as usize };
        let raw_entry = self.entry(idx);
        let end = (raw_entry & OFFSET_MASK) as usize;
        let base = 2 + 2 * count;
        if end < start || base + end > BLOCK_SIZE {
            return Err(Error::Corruption {
                block: self.block_index,
                reason: format!("item {idx} offsets {start}..{end} out of bounds"),
            });
        }
        Ok((&self.bytes[base + start..base + end], raw_entry & RAW_FLAG != 0))
    }
}
