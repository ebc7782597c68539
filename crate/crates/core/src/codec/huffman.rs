//! Canonical Huffman coding over byte symbols.
//!
//! Codes are canonical — assigned lexicographically by (length, symbol) — so
//! the table is reconstructible from the persisted frequency table alone and
//! identical across runs. A degenerate single-symbol alphabet gets a 1-bit
//! code.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::codec::bits::{BitReader, BitWriter};
use crate::codec::entropy::FrequencyTable;
use crate::error::{Error, Result};

const MAX_CODE_LEN: usize = 64;

#[derive(Debug, Clone)]
pub struct HuffmanTable {
    /// Code length per symbol; 0 means the symbol is absent.
    pub lengths: [u8; 256],
    /// Right-aligned canonical code per symbol.
    codes: [u64; 256],
    max_len: usize,
    /// Canonical decode state, indexed by code length.
    first_code: Vec<u64>,
    count_per_len: Vec<u32>,
    offset_per_len: Vec<u32>,
    /// Symbols sorted by (length, symbol).
    symbols: Vec<u8>,
}

impl HuffmanTable {
    pub fn code(&self, symbol: u8) -> Option<(u64, u8)> {
        let len = self.lengths[symbol as usize];
        (len > 0).then(|| (self.codes[symbol as usize], len))
    }

    /// Encoded size in bits of `data` under this table, without encoding.
    pub fn encoded_bits(&self, data: &[u8]) -> Result<u64> {
        let mut bits = 0u64;
        for &b in data {
            let len = self.lengths[b as usize];
            if len == 0 {
                return Err(Error::usage(format!("symbol {b:#04x} has no code")));
            }
            bits += len as u64;
        }
        Ok(bits)
    }
}

/// Computes code lengths with the textbook two-node merge, deterministically
/// (ties broken by node creation order), then assigns canonical codes.
pub fn huffman_build(table: &FrequencyTable) -> Result<HuffmanTable> {
    let mut active: Vec<u8> = (0u16..256)
        .filter(|&s| table.counts[s as usize] > 0)
        .map(|s| s as u8)
        .collect();
    if active.is_empty() {
        return Err(Error::usage("cannot build a Huffman table from an all-zero histogram"));
    }

    let mut lengths = [0u8; 256];
    if active.len() == 1 {
        lengths[active[0] as usize] = 1;
        return finish_table(lengths);
    }

    // tree nodes: leaves first, internals appended; parent links give depths
    let mut parent: Vec<usize> = vec![usize::MAX; active.len()];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = active
        .iter()
        .enumerate()
        .map(|(i, &s)| Reverse((table.counts[s as usize], i)))
        .collect();
    while heap.len() > 1 {
        let Reverse((c1, n1)) = heap.pop().unwrap();
        let Reverse((c2, n2)) = heap.pop().unwrap();
        let id = parent.len();
        parent.push(usize::MAX);
        parent[n1] = id;
        parent[n2] = id;
        heap.push(Reverse((c1 + c2, id)));
    }

    for (i, &s) in active.iter().enumerate() {
        let mut depth = 0usize;
        let mut n = i;
        while parent[n] != usize::MAX {
            n = parent[n];
            depth += 1;
        }
        if depth > MAX_CODE_LEN {
            return Err(Error::usage(format!("huffman code length {depth} exceeds 64 bits")));
        }
        lengths[s as usize] = depth as u8;
    }
    active.clear();
    finish_table(lengths)
}

fn finish_table(lengths: [u8; 256]) -> Result<HuffmanTable> {
    let max_len = lengths.iter().copied().max().unwrap() as usize;
    let mut count_per_len = vec![0u32; max_len + 1];
    for &l in lengths.iter() {
        if l > 0 {
            count_per_len[l as usize] += 1;
        }
    }

    // canonical first codes per length
    let mut first_code = vec![0u64; max_len + 1];
    let mut offset_per_len = vec![0u32; max_len + 1];
    let mut code = 0u64;
    let mut offset = 0u32;
    for len in 1..=max_len {
        code = (code + count_per_len[len - 1] as u64) << 1;
        first_code[len] = code;
        offset_per_len[len] = offset;
        offset += count_per_len[len];
    }

    let mut symbols: Vec<u8> = (0u16..256)
        .filter(|&s| lengths[s as usize] > 0)
        .map(|s| s as u8)
        .collect();
    symbols.sort_by_key(|&s| (lengths[s as usize], s));

    let mut codes = [0u64; 256];
    let mut next = first_code.clone();
    for &s in &symbols {
        let len = lengths[s as usize] as usize;
        codes[s as usize] = next[len];
        next[len] += 1;
    }

    Ok(HuffmanTable { lengths, codes, max_len, first_code, count_per_len, offset_per_len, symbols })
}

/// Encodes `data`; returns the packed bitstream and its exact bit count.
pub fn huffman_encode(data: &[u8], table: &HuffmanTable) -> Result<(Vec<u8>, u64)> {
    let mut w = BitWriter::with_capacity(data.len() * 8);
    encode_into(data, table, &mut w)?;
    let (bytes, bits) = w.into_parts();
    Ok((bytes, bits as u64))
}

pub(crate) fn encode_into(data: &[u8], table: &HuffmanTable, w: &mut BitWriter) -> Result<()> {
    for &b in data {
        let len = table.lengths[b as usize];
        if len == 0 {
            return Err(Error::usage(format!("symbol {b:#04x} has no code")));
        }
        w.write_bits(table.codes[b as usize], len as usize);
    }
    Ok(())
}

/// Decodes exactly `out_len` symbols; running out of bits first is a
/// corruption error.
pub fn huffman_decode(
    bitstream: &[u8],
    bit_count: u64,
    table: &HuffmanTable,
    out_len: usize,
) -> Result<Vec<u8>> {
    let mut r = BitReader::new(bitstream, bit_count as usize);
    decode_from(&mut r, table, out_len)
}

pub(crate) fn decode_from(r: &mut BitReader<'_>, table: &HuffmanTable, out_len: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(out_len);
    'symbols: while out.len() < out_len {
        let mut code = 0u64;
        for len in 1..=table.max_len {
            let bit = r.read_bit().ok_or_else(|| Error::Corruption {
                block: 0,
                reason: format!("bitstream exhausted after {} of {out_len} symbols", out.len()),
            })?;
            code = (code << 1) | bit as u64;
            let n = table.count_per_len[len];
            if n > 0 && code >= table.first_code[len] && code - table.first_code[len] < n as u64 {
                let idx = table.offset_per_len[len] + (code - table.first_code[len]) as u32;
                out.push(table.symbols[idx as usize]);
                continue 'symbols;
            }
        }
        return Err(Error::Corruption { block: 0, reason: "invalid huffman code".into() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::entropy::build_frequency_table;
    use proptest::prelude::*;

    fn table_for(data: &[u8]) -> HuffmanTable {
        huffman_build(&build_frequency_table(data).unwrap()).unwrap()
    }

    #[test]
    fn single_symbol_gets_one_bit() {
        let t = table_for(b"aaaa");
        assert_eq!(t.lengths[b'a' as usize], 1);
        let (bytes, bits) = huffman_encode(b"aaaa", &t).unwrap();
        assert_eq!(bits, 4);
        assert_eq!(huffman_decode(&bytes, bits, &t, 4).unwrap(), b"aaaa");
    }

    #[test]
    fn two_symbols_both_length_one() {
        let t = table_for(b"ab");
        assert_eq!(t.lengths[b'a' as usize], 1);
        assert_eq!(t.lengths[b'b' as usize], 1);
    }

    #[test]
    fn textbook_lengths() {
        // counts {a:5, b:2, c:1, d:1} merge to depths {a:1, b:2, c:3, d:3}
        let data: Vec<u8> = b"aaaaabbcd".to_vec();
        let t = table_for(&data);
        assert_eq!(t.lengths[b'a' as usize], 1);
        assert_eq!(t.lengths[b'b' as usize], 2);
        assert_eq!(t.lengths[b'c' as usize], 3);
        assert_eq!(t.lengths[b'd' as usize], 3);
    }

    #[test]
    fn kraft_inequality_holds() {
        let data: Vec<u8> = (0..200u32).map(|i| (i * i % 251) as u8).collect();
        let t = table_for(&data);
        let kraft: f64 = t.lengths.iter().filter(|&&l| l > 0).map(|&l| 2f64.powi(-(l as i32))).sum();
        assert!(kraft <= 1.0 + 1e-12);
    }

    #[test]
    fn empty_input_is_empty_output() {
        let t = table_for(b"x");
        let (bytes, bits) = huffman_encode(&[], &t).unwrap();
        assert!(bytes.is_empty());
        assert_eq!(bits, 0);
        assert!(huffman_decode(&bytes, bits, &t, 0).unwrap().is_empty());
    }

    #[test]
    fn unknown_symbol_rejected() {
        let t = table_for(b"abc");
        assert!(matches!(huffman_encode(b"abz", &t), Err(Error::Usage(_))));
    }

    #[test]
    fn truncated_stream_is_corruption() {
        let t = table_for(b"aabbbcc");
        let (bytes, bits) = huffman_encode(b"abcabc", &t).unwrap();
        assert!(matches!(
            huffman_decode(&bytes, bits.saturating_sub(2), &t, 6),
            Err(Error::Corruption { .. })
        ));
    }

    #[test]
    fn reconstruction_is_deterministic() {
        let data: Vec<u8> = (0..1000u32).map(|i| (i % 37) as u8).collect();
        let ft = build_frequency_table(&data).unwrap();
        let t1 = huffman_build(&ft).unwrap();
        let t2 = huffman_build(&FrequencyTable::from_bytes(&ft.to_bytes()).unwrap()).unwrap();
        assert_eq!(t1.lengths, t2.lengths);
        assert_eq!(t1.codes, t2.codes);
    }

    proptest! {
        #[test]
        fn round_trip_random(data in proptest::collection::vec(any::<u8>(), 1..2000)) {
            let t = table_for(&data);
            let (bytes, bits) = huffman_encode(&data, &t).unwrap();
            prop_assert_eq!(huffman_decode(&bytes, bits, &t, data.len()).unwrap(), data.clone());
            // near-optimality: within one bit per symbol of the entropy bound
            let h = crate::codec::entropy::byte_entropy(&data);
            prop_assert!(bits as f64 <= (h + 1.0) * data.len() as f64 + 8.0);
        }
    }
}
