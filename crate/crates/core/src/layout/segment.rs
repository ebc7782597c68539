//! Sealed-segment format: two-stage compression (per-chunk XOR-delta
//! decision, then one segment-wide canonical Huffman pass) packed into
//! 4,096-byte blocks, plus the chunk metadata that makes single-block random
//! reads possible.
//!
//! Data file layout: one header block, then `total_blocks` data blocks.
//! Metadata file layout: fixed 32-byte header, 2,048-byte frequency table,
//! then per-chunk entries of exactly `4 * (num_blocks + 3) + V` bytes.

use crate::codec::delta::{choose_chunk_transform, xor_in_place};
use crate::codec::entropy::{FrequencyTable, FREQUENCY_TABLE_BYTES};
use crate::codec::huffman::{huffman_build, huffman_decode, huffman_encode, HuffmanTable};
use crate::error::{Error, Result};
use crate::layout::block::{BlockBuilder, BlockView, BLOCK_SIZE};

pub const SEG_META_MAGIC: u32 = 0x4d53_5651; // "QVSM"
pub const SEG_DATA_MAGIC: u32 = 0x4453_5651; // "QVSD"
pub const SEG_HEADER_BYTES: usize = 32;
pub const FORMAT_VERSION: u16 = 1;

const FLAG_RELOCATED: u16 = 1;

/// In-memory per-chunk lookup metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkMetadata {
    /// First block of the chunk, in block units from the start of the
    /// segment file (block 0 is the data header block).
    pub first_block_offset: u32,
    pub num_blocks: u32,
    /// Key of the first vector stored in each block: a global vector id for
    /// log-order segments, a segment-local slot for relocated (GC output)
    /// segments. Strictly increasing.
    pub boundaries: Vec<u32>,
    pub use_delta: bool,
    /// Base vector for the XOR transform, zero-filled when unused; always
    /// exactly `V` bytes on disk.
    pub base: Vec<u8>,
}

impl ChunkMetadata {
    pub fn serialized_len(num_blocks: usize, vector_width: usize) -> usize {
        4 * (num_blocks + 3) + vector_width
    }

    fn write_to(&self, out: &mut Vec<u8>, vector_width: usize) {
        out.extend_from_slice(&self.first_block_offset.to_le_bytes());
        out.extend_from_slice(&self.num_blocks.to_le_bytes());
        out.extend_from_slice(&(self.use_delta as u32).to_le_bytes());
        for b in &self.boundaries {
            out.extend_from_slice(&b.to_le_bytes());
        }
        debug_assert_eq!(self.base.len(), vector_width);
        out.extend_from_slice(&self.base);
    }

    fn read_from(bytes: &[u8], off: &mut usize, vector_width: usize) -> Result<Self> {
        let err = |reason: String, at: usize| Error::Format { offset: at as u64, reason };
        let need = |off: usize, n: usize, len: usize| -> Result<()> {
            if off + n > len {
                Err(err("chunk metadata truncated".into(), off))
            } else {
                Ok(())
            }
        };
        need(*off, 12, bytes.len())?;
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let first_block_offset = u32_at(*off);
        let num_blocks = u32_at(*off + 4);
        let use_delta = match u32_at(*off + 8) {
            0 => false,
            1 => true,
            other => return Err(err(format!("bad use_delta flag {other}"), *off + 8)),
        };
        *off += 12;
        need(*off, num_blocks as usize * 4 + vector_width, bytes.len())?;
        let mut boundaries = Vec::with_capacity(num_blocks as usize);
        for i in 0..num_blocks as usize {
            boundaries.push(u32_at(*off + 4 * i));
        }
        *off += num_blocks as usize * 4;
        let base = bytes[*off..*off + vector_width].to_vec();
        *off += vector_width;
        if !boundaries.windows(2).all(|w| w[0] < w[1]) {
            return Err(err("block boundaries not strictly increasing".into(), *off));
        }
        Ok(ChunkMetadata { first_block_offset, num_blocks, boundaries, use_delta, base })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentState {
    Mutable,
    Sealed,
}

/// Per-segment state held in memory. For sealed segments the frequency table
/// and chunk metadata come from the `.meta` file; the Huffman table is
/// rebuilt from the frequency table at load time.
#[derive(Debug, Clone)]
pub struct SegmentManifest {
    pub segment_id: u32,
    pub state: SegmentState,
    pub capacity: u32,
    pub count: u32,
    pub live_count: u32,
    pub stale_count: u32,
    /// GC output segment: boundaries are slots, ids resolve via the location map.
    pub relocated: bool,
    pub total_blocks: u32,
    pub vectors_per_chunk: u32,
    pub frequency_table: Option<FrequencyTable>,
    pub chunks: Vec<ChunkMetadata>,
}

impl SegmentManifest {
    pub fn new_mutable(segment_id: u32, capacity: u32) -> Self {
        SegmentManifest {
            segment_id,
            state: SegmentState::Mutable,
            capacity,
            count: 0,
            live_count: 0,
            stale_count: 0,
            relocated: false,
            total_blocks: 0,
            vectors_per_chunk: 0,
            frequency_table: None,
            chunks: Vec::new(),
        }
    }

    /// First key (global id, or slot for relocated segments) stored in this
    /// segment.
    pub fn first_key(&self, capacity: u32) -> u32 {
        if self.relocated {
            0
        } else {
            self.segment_id * capacity
        }
    }
}

/// Chunk-capacity formula: `C = (V + 12) / (beta - alpha/1024)`, rounded down
/// to a multiple of `V`.
pub fn chunk_capacity_for_budget(beta: f64, alpha: f64, vector_width: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::usage(format!("alpha {alpha} not in (0, 1]")));
    }
    let floor = alpha / 1024.0;
    if beta <= floor {
        return Err(Error::InfeasibleBudget { beta, floor });
    }
    let c = (vector_width as f64 + 12.0) / (beta - floor);
    let c = (c as usize / vector_width) * vector_width;
    if c < vector_width {
        return Err(Error::InfeasibleBudget { beta, floor });
    }
    Ok(c)
}

/// Output of sealing: the complete data-file and meta-file images.
pub struct SealedSegment {
    pub data: Vec<u8>,
    pub meta: Vec<u8>,
    pub manifest: SegmentManifest,
    pub huffman: HuffmanTable,
}

/// Seals one segment: chooses per-chunk transforms over a 10% sample, builds
/// one frequency table over the transformed payload, Huffman-encodes every
/// vector (raw fallback per vector when coding would not shrink it), and
/// packs the results into blocks. `first_key` is the segment's base id, or 0
/// for relocated segments whose boundaries live in slot space.
pub fn seal_segment_bytes(
    segment_id: u32,
    raw: &[u8],
    vector_width: usize,
    vectors_per_chunk: u32,
    capacity: u32,
    first_key: u32,
    relocated: bool,
    sample_fraction: f64,
) -> Result<SealedSegment> {
    if vector_width == 0 || raw.is_empty() || raw.len() % vector_width != 0 {
        return Err(Error::usage("segment payload must hold whole vectors"));
    }
    let count = raw.len() / vector_width;
    let vpc = vectors_per_chunk as usize;
    if vpc == 0 {
        return Err(Error::usage("vectors_per_chunk must be positive"));
    }

    // stage 1: per-chunk transform decision
    let vectors: Vec<&[u8]> = raw.chunks_exact(vector_width).collect();
    let num_chunks = count.div_ceil(vpc);
    let mut transformed = raw.to_vec();
    let mut chunk_delta = Vec::with_capacity(num_chunks);
    for c in 0..num_chunks {
        let lo = c * vpc;
        let hi = ((c + 1) * vpc).min(count);
        let t = choose_chunk_transform(&vectors[lo..hi], sample_fraction)?;
        if let Some(base) = &t.base {
            for v in transformed[lo * vector_width..hi * vector_width].chunks_exact_mut(vector_width) {
                xor_in_place(v, base);
            }
        }
        chunk_delta.push(t);
    }

    // stage 2: one frequency table and Huffman pass over the whole segment
    let freq = crate::codec::entropy::build_frequency_table(&transformed)?;
    let huffman = huffman_build(&freq)?;

    let mut data = vec![0u8; BLOCK_SIZE]; // header block, filled below
    let mut chunks = Vec::with_capacity(num_chunks);
    let mut builder = BlockBuilder::new();
    for c in 0..num_chunks {
        let lo = c * vpc;
        let hi = ((c + 1) * vpc).min(count);
        let first_block_offset = (data.len() / BLOCK_SIZE) as u32;
        let mut boundaries = Vec::new();
        for i in lo..hi {
            let bytes = &transformed[i * vector_width..(i + 1) * vector_width];
            let (encoded, _bits) = huffman_encode(bytes, &huffman)?;
            let (item, is_raw): (&[u8], bool) =
                if encoded.len() >= vector_width { (bytes, true) } else { (&encoded, false) };
            if !builder.fits(item.len()) {
                data.extend_from_slice(&builder.finish());
            }
            if builder.is_empty() {
                boundaries.push(first_key + i as u32);
            }
            builder.push(item, is_raw);
        }
        if !builder.is_empty() {
            data.extend_from_slice(&builder.finish());
        }
        let num_blocks = (data.len() / BLOCK_SIZE) as u32 - first_block_offset;
        chunks.push(ChunkMetadata {
            first_block_offset,
            num_blocks,
            boundaries,
            use_delta: chunk_delta[c].use_delta,
            base: chunk_delta[c]
                .base
                .clone()
                .unwrap_or_else(|| vec![0u8; vector_width]),
        });
    }

    let total_blocks = (data.len() / BLOCK_SIZE - 1) as u32;
    write_data_header(&mut data[..BLOCK_SIZE], segment_id, count as u32, total_blocks, relocated);

    let manifest = SegmentManifest {
        segment_id,
        state: SegmentState::Sealed,
        capacity,
        count: count as u32,
        live_count: count as u32,
        stale_count: 0,
        relocated,
        total_blocks,
        vectors_per_chunk,
        frequency_table: Some(freq.clone()),
        chunks: chunks.clone(),
    };
    let meta = encode_meta(&manifest, vector_width);
    Ok(SealedSegment { data, meta, manifest, huffman })
}

fn write_data_header(block: &mut [u8], segment_id: u32, count: u32, total_blocks: u32, relocated: bool) {
    block[..4].copy_from_slice(&SEG_DATA_MAGIC.to_le_bytes());
    block[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    block[6..8].copy_from_slice(&(if relocated { FLAG_RELOCATED } else { 0u16 }).to_le_bytes());
    block[8..12].copy_from_slice(&segment_id.to_le_bytes());
    block[12..16].copy_from_slice(&count.to_le_bytes());
    block[16..20].copy_from_slice(&total_blocks.to_le_bytes());
}

/// Whether a data file begins with a sealed-segment header block naming this
/// segment (distinguishes committed sealed data from a raw mutable log).
pub fn data_header_matches(block: &[u8], segment_id: u32) -> bool {
    block.len() >= 20
        && u32::from_le_bytes(block[..4].try_into().unwrap()) == SEG_DATA_MAGIC
        && u32::from_le_bytes(block[8..12].try_into().unwrap()) == segment_id
}

fn encode_meta(m: &SegmentManifest, vector_width: usize) -> Vec<u8> {
    let chunk_bytes: usize = m
        .chunks
        .iter()
        .map(|c| ChunkMetadata::serialized_len(c.num_blocks as usize, vector_width))
        .sum();
    let mut out = Vec::with_capacity(SEG_HEADER_BYTES + FREQUENCY_TABLE_BYTES + chunk_bytes);
    out.extend_from_slice(&SEG_META_MAGIC.to_le_bytes());
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(if m.relocated { FLAG_RELOCATED } else { 0u16 }).to_le_bytes());
    out.extend_from_slice(&m.segment_id.to_le_bytes());
    out.extend_from_slice(&m.count.to_le_bytes());
    out.extend_from_slice(&(m.chunks.len() as u32).to_le_bytes());
    out.extend_from_slice(&m.vectors_per_chunk.to_le_bytes());
    out.extend_from_slice(&m.total_blocks.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    debug_assert_eq!(out.len(), SEG_HEADER_BYTES);
    out.extend_from_slice(&m.frequency_table.as_ref().unwrap().to_bytes());
    for c in &m.chunks {
        c.write_to(&mut out, vector_width);
    }
    out
}

/// Parses a `.meta` file into a sealed manifest (counts start fully live;
/// the store applies tombstones afterward).
pub fn decode_meta(bytes: &[u8], capacity: u32, vector_width: usize) -> Result<SegmentManifest> {
    if bytes.len() < SEG_HEADER_BYTES + FREQUENCY_TABLE_BYTES {
        return Err(Error::Format { offset: 0, reason: "segment metadata truncated".into() });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(0) != SEG_META_MAGIC {
        return Err(Error::Format { offset: 0, reason: "bad segment metadata magic".into() });
    }
    let flags = u16::from_le_bytes(bytes[6..8].try_into().unwrap());
    let segment_id = u32_at(8);
    let count = u32_at(12);
    let num_chunks = u32_at(16);
    let vectors_per_chunk = u32_at(20);
    let total_blocks = u32_at(24);
    let freq = FrequencyTable::from_bytes(
        &bytes[SEG_HEADER_BYTES..SEG_HEADER_BYTES + FREQUENCY_TABLE_BYTES],
    )?;
    let mut off = SEG_HEADER_BYTES + FREQUENCY_TABLE_BYTES;
    let mut chunks = Vec::with_capacity(num_chunks as usize);
    for _ in 0..num_chunks {
        chunks.push(ChunkMetadata::read_from(bytes, &mut off, vector_width)?);
    }
    if off != bytes.len() {
        return Err(Error::Format {
            offset: off as u64,
            reason: "trailing bytes after chunk metadata".into(),
        });
    }
    Ok(SegmentManifest {
        segment_id,
        state: SegmentState::Sealed,
        capacity,
        count,
        live_count: count,
        stale_count: 0,
        relocated: flags & FLAG_RELOCATED != 0,
        total_blocks,
        vectors_per_chunk,
        frequency_table: Some(freq),
        chunks,
    })
}

/// Locates a vector inside a sealed segment: chunk by division, block by
/// binary search over the chunk's boundary keys, slot by offset from the
/// block's first key. `key` is a global id for log-order segments and a
/// segment-local slot for relocated ones.
pub fn locate_key(manifest: &SegmentManifest, key: u32) -> Result<(usize, usize, usize)> {
    let first = manifest.first_key(manifest.capacity);
    if key < first || key - first >= manifest.count {
        return Err(Error::Lookup(format!(
            "key {key} outside segment {} range", manifest.segment_id
        )));
    }
    let local = (key - first) as usize;
    let chunk_idx = local / manifest.vectors_per_chunk as usize;
    let chunk = manifest
        .chunks
        .get(chunk_idx)
        .ok_or_else(|| Error::Lookup(format!("chunk {chunk_idx} missing")))?;
    let block_idx = chunk.boundaries.partition_point(|&b| b <= key) - 1;
    let slot = (key - chunk.boundaries[block_idx]) as usize;
    Ok((chunk_idx, block_idx, slot))
}

/// Spec-level `locate_vector`: id-keyed lookup (log-order segments).
pub fn locate_vector(manifest: &SegmentManifest, id: u32) -> Result<(usize, usize, usize)> {
    if manifest.state != SegmentState::Sealed {
        return Err(Error::usage("locate_vector requires a sealed segment"));
    }
    locate_key(manifest, id)
}

/// Decodes one vector from a block image previously located with
/// [`locate_key`].
pub fn decode_vector_from_block(
    block_bytes: &[u8],
    abs_block_index: u64,
    slot: usize,
    chunk: &ChunkMetadata,
    huffman: &HuffmanTable,
    vector_width: usize,
) -> Result<Vec<u8>> {
    let view = BlockView::new(block_bytes, abs_block_index)?;
    let (item, is_raw) = view.item(slot)?;
    let mut bytes = if is_raw {
        if item.len() != vector_width {
            return Err(Error::Corruption {
                block: abs_block_index,
                reason: format!("raw item of {} bytes, expected {vector_width}", item.len()),
            });
        }
        item.to_vec()
    } else {
        huffman_decode(item, item.len() as u64 * 8, huffman, vector_width).map_err(|e| match e {
            Error::Corruption { reason, .. } => Error::Corruption { block: abs_block_index, reason },
            other => other,
        })?
    };
    if chunk.use_delta {
        xor_in_place(&mut bytes, &chunk.base);
    }
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seal_simple(raw: &[u8], v: usize, vpc: u32) -> SealedSegment {
        seal_segment_bytes(0, raw, v, vpc, 1 << 20, 0, false, 0.10).unwrap()
    }

    #[test]
    fn chunk_capacity_formula() {
        // V=512, alpha=1, beta=0.002 -> 512,000 bytes exactly
        assert_eq!(chunk_capacity_for_budget(0.002, 1.0, 512).unwrap(), 512_000);
        // inverse consistency: beta for C = 4 MiB maps back within one V
        let c = 4 * 1024 * 1024;
        let beta = (512.0 + 12.0) / c as f64 + 1.0 / 1024.0;
        let back = chunk_capacity_for_budget(beta, 1.0, 512).unwrap();
        assert!((back as i64 - c as i64).unsigned_abs() as usize <= 512);
        // infeasible budget
        assert!(matches!(
            chunk_capacity_for_budget(1.0 / 1024.0, 1.0, 512),
            Err(Error::InfeasibleBudget { .. })
        ));
    }

    #[test]
    fn seal_identical_vectors_compresses_and_round_trips() {
        let v = 32;
        let count = 3000;
        let mut raw = Vec::new();
        for _ in 0..count {
            raw.extend((0..v).map(|i| (i * 7 % 251) as u8));
        }
        let sealed = seal_simple(&raw, v, 1024);
        assert!(sealed.manifest.chunks.iter().all(|c| c.use_delta));
        assert!(data_header_matches(&sealed.data[..BLOCK_SIZE], 0));
        assert!(!data_header_matches(&raw[..], 0));
        // far below raw: identical vectors huffman-code to near nothing
        assert!(sealed.data.len() < raw.len());
        for i in 0..count {
            let (ci, bi, slot) = locate_key(&sealed.manifest, i as u32).unwrap();
            let chunk = &sealed.manifest.chunks[ci];
            let abs = (chunk.first_block_offset + bi as u32) as usize;
            let block = &sealed.data[abs * BLOCK_SIZE..(abs + 1) * BLOCK_SIZE];
            let got = decode_vector_from_block(block, abs as u64, slot, chunk, &sealed.huffman, v)
                .unwrap();
            assert_eq!(got, raw[i * v..(i + 1) * v]);
        }
    }

    #[test]
    fn seal_random_vectors_uses_raw_fallback() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let v = 64;
        let count = 500;
        let mut raw = vec![0u8; v * count];
        rng.fill(&mut raw[..]);
        let sealed = seal_simple(&raw, v, 256);
        // every item payload is at most the raw vector size
        for b in 1..=sealed.manifest.total_blocks as usize {
            let view = BlockView::new(&sealed.data[b * BLOCK_SIZE..(b + 1) * BLOCK_SIZE], b as u64)
                .unwrap();
            for i in 0..view.count() {
                let (item, _) = view.item(i).unwrap();
                assert!(item.len() <= v);
            }
        }
    }

    #[test]
    fn meta_size_formula_and_round_trip() {
        let v = 16;
        let mut raw = Vec::new();
        for i in 0..1000u32 {
            raw.extend((0..v).map(|d| (i as usize + d) as u8));
        }
        let sealed = seal_simple(&raw, v, 300);
        let chunk_bytes: usize = sealed
            .manifest
            .chunks
            .iter()
            .map(|c| ChunkMetadata::serialized_len(c.num_blocks as usize, v))
            .sum();
        assert_eq!(sealed.meta.len(), SEG_HEADER_BYTES + FREQUENCY_TABLE_BYTES + chunk_bytes);

        let decoded = decode_meta(&sealed.meta, 1 << 20, v).unwrap();
        assert_eq!(decoded.chunks, sealed.manifest.chunks);
        assert_eq!(decoded.count, 1000);
        assert_eq!(decoded.total_blocks, sealed.manifest.total_blocks);
    }

    #[test]
    fn locate_boundary_cases() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let v = 8;
        let count = 2048usize;
        let mut raw = vec![0u8; count * v];
        rng.fill(&mut raw[..]);
        let sealed = seal_segment_bytes(2, &raw, v, 512, 4096, 8192, false, 0.10).unwrap();
        let m = &sealed.manifest;
        // a block-boundary id maps to slot 0
        let chunk = &m.chunks[0];
        assert!(chunk.num_blocks > 1);
        let b1 = chunk.boundaries[1];
        assert_eq!(locate_key(m, b1).unwrap(), (0, 1, 0));
        // one less than a boundary is the previous block's last slot
        let (ci, bi, slot) = locate_key(m, b1 - 1).unwrap();
        assert_eq!((ci, bi), (0, 0));
        assert_eq!(slot as u32, b1 - 1 - chunk.boundaries[0]);
        // out of range
        assert!(locate_key(m, 8192 + count as u32).is_err());
        assert!(locate_key(m, 0).is_err());
    }
}
