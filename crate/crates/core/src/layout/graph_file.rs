//! Block-packed compressed graph file plus its sparse in-memory index.
//!
//! `graph.data` holds Elias-Fano-encoded adjacency lists packed into
//! 4,096-byte blocks in vertex order (a list never spans blocks); vertices
//! within a block are consecutive, so an item index is just `vertex -
//! block_boundary`. `graph.sparse` persists the first vertex id of every
//! block so startup never scans the graph itself.

use std::fs::{self, File};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;
use std::sync::Arc;

use crate::codec::elias_fano::{self, ef_decode, ef_encode, EncodedNeighborList};
use crate::error::{Error, Result};
use crate::layout::block::{BlockBuilder, BlockView, BLOCK_SIZE};
use crate::layout::store::{write_durable, IoStats};

pub const SPARSE_MAGIC: u32 = 0x5053_5651; // "QVSP"

/// Builds a graph file incrementally, either by packing fresh lists or by
/// copying existing blocks verbatim (the block-sparse merge path).
pub struct GraphFileBuilder {
    data: Vec<u8>,
    boundaries: Vec<u32>,
    universe: u32,
    packer: BlockBuilder,
    packer_first_vertex: u32,
    next_vertex: u32,
}

impl GraphFileBuilder {
    pub fn new(universe: u32) -> Self {
        GraphFileBuilder {
            data: Vec::new(),
            boundaries: Vec::new(),
            universe,
            packer: BlockBuilder::new(),
            packer_first_vertex: 0,
            next_vertex: 0,
        }
    }

    pub fn next_vertex(&self) -> u32 {
        self.next_vertex
    }

    fn flush_packer(&mut self) {
        if !self.packer.is_empty() {
            self.boundaries.push(self.packer_first_vertex);
            self.data.extend_from_slice(&self.packer.finish());
        }
    }

    /// Appends the adjacency list of the next vertex (lists must arrive in
    /// dense vertex order). An empty slice is a valid placeholder entry.
    pub fn push_list(&mut self, sorted_ids: &[u32]) -> Result<()> {
        let item = if sorted_ids.is_empty() {
            elias_fano::empty(self.universe).to_bytes()
        } else {
            ef_encode(sorted_ids, self.universe)?.to_bytes()
        };
        if !self.packer.fits(item.len()) {
            self.flush_packer();
        }
        if self.packer.is_empty() {
            self.packer_first_vertex = self.next_vertex;
        }
        self.packer.push(&item, false);
        self.next_vertex += 1;
        Ok(())
    }

    /// Copies one existing block verbatim; `first_vertex` and `count` come
    /// from the old file's sparse index and block header.
    pub fn copy_block(&mut self, block: &[u8], first_vertex: u32, count: u32) -> Result<()> {
        if block.len() != BLOCK_SIZE {
            return Err(Error::usage("copy_block requires a whole block"));
        }
        if first_vertex != self.next_vertex {
            return Err(Error::usage(format!(
                "copied block starts at vertex {first_vertex}, expected {}",
                self.next_vertex
            )));
        }
        self.flush_packer();
        self.boundaries.push(first_vertex);
        self.data.extend_from_slice(block);
        self.next_vertex += count;
        Ok(())
    }

    /// Final file image and sparse boundaries.
    pub fn finish(mut self) -> (Vec<u8>, Vec<u32>) {
        self.flush_packer();
        (self.data, self.boundaries)
    }
}

fn encode_sparse(boundaries: &[u32], universe: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + boundaries.len() * 4);
    out.extend_from_slice(&SPARSE_MAGIC.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(boundaries.len() as u32).to_le_bytes());
    out.extend_from_slice(&universe.to_le_bytes());
    for b in boundaries {
        out.extend_from_slice(&b.to_le_bytes());
    }
    out
}

fn decode_sparse(bytes: &[u8], path: &Path) -> Result<(Vec<u32>, u32)> {
    if bytes.len() < 16 || u32::from_le_bytes(bytes[..4].try_into().unwrap()) != SPARSE_MAGIC {
        return Err(Error::startup(path, "bad sparse index header"));
    }
    let num_blocks = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let universe = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if bytes.len() != 16 + num_blocks * 4 {
        return Err(Error::startup(path, "sparse index length mismatch"));
    }
    let boundaries: Vec<u32> = bytes[16..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if !boundaries.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::startup(path, "sparse boundaries not strictly increasing"));
    }
    Ok((boundaries, universe))
}

/// Writes `graph.data` + `graph.sparse` for a dense adjacency (vertex ids
/// `0..N-1`). Lists are sorted and deduplicated before encoding; neighbor
/// order never affects search results.
pub fn write_graph_index(dir: impl AsRef<Path>, adjacency: &[Vec<u32>], universe: u32) -> Result<(u64, u32)> {
    if adjacency.len() as u64 != universe as u64 {
        return Err(Error::usage(format!(
            "adjacency holds {} lists for a universe of {universe}",
            adjacency.len()
        )));
    }
    let mut builder = GraphFileBuilder::new(universe);
    let mut sorted = Vec::new();
    for list in adjacency {
        sorted.clear();
        sorted.extend_from_slice(list);
        sorted.sort_unstable();
        sorted.dedup();
        builder.push_list(&sorted)?;
    }
    let (data, boundaries) = builder.finish();
    let blocks = boundaries.len() as u32;
    commit_graph_files(dir.as_ref(), &data, &boundaries, universe)?;
    Ok((data.len() as u64, blocks))
}

/// Atomically replaces the graph files (tmp write + rename, sparse last).
pub fn commit_graph_files(dir: &Path, data: &[u8], boundaries: &[u32], universe: u32) -> Result<()> {
    let data_tmp = dir.join("graph.data.tmp");
    let sparse_tmp = dir.join("graph.sparse.tmp");
    write_durable(&data_tmp, data)?;
    write_durable(&sparse_tmp, &encode_sparse(boundaries, universe))?;
    fs::rename(&data_tmp, dir.join("graph.data")).map_err(|e| Error::io(dir.join("graph.data"), e))?;
    fs::rename(&sparse_tmp, dir.join("graph.sparse"))
        .map_err(|e| Error::io(dir.join("graph.sparse"), e))?;
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

/// Read handle over an immutable graph file generation.
pub struct GraphStore {
    path: PathBuf,
    file: File,
    boundaries: Vec<u32>,
    universe: u32,
    io: Arc<IoStats>,
}

impl GraphStore {
    /// Opens the current graph generation, touching only the sparse index.
    pub fn open(dir: impl AsRef<Path>, io: Arc<IoStats>) -> Result<GraphStore> {
        let dir = dir.as_ref();
        let sparse_path = dir.join("graph.sparse");
        if !sparse_path.exists() {
            return Err(Error::startup(&sparse_path, "missing metadata file"));
        }
        let bytes = fs::read(&sparse_path).map_err(|e| Error::io(&sparse_path, e))?;
        io.metadata_bytes_read.fetch_add(bytes.len() as u64, Ordering::Relaxed);
        let (boundaries, universe) = decode_sparse(&bytes, &sparse_path)?;
        let path = dir.join("graph.data");
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        if len != boundaries.len() as u64 * BLOCK_SIZE as u64 {
            return Err(Error::startup(
                &path,
                format!("graph file holds {len} bytes but the sparse index lists {} blocks", boundaries.len()),
            ));
        }
        Ok(GraphStore { path, file, boundaries, universe, io })
    }

    pub fn universe(&self) -> u32 {
        self.universe
    }

    pub fn num_blocks(&self) -> u32 {
        self.boundaries.len() as u32
    }

    pub fn boundaries(&self) -> &[u32] {
        &self.boundaries
    }

    pub fn file_bytes(&self) -> u64 {
        self.boundaries.len() as u64 * BLOCK_SIZE as u64
    }

    fn block_of(&self, vertex: u32) -> Result<usize> {
        if vertex >= self.universe || self.boundaries.is_empty() {
            return Err(Error::Lookup(format!(
                "vertex {vertex} outside graph universe {}",
                self.universe
            )));
        }
        Ok(self.boundaries.partition_point(|&b| b <= vertex) - 1)
    }

    pub fn read_block(&self, block_idx: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; BLOCK_SIZE];
        self.file
            .read_exact_at(&mut buf, block_idx as u64 * BLOCK_SIZE as u64)
            .map_err(|e| Error::io(&self.path, e))?;
        self.io.graph_ios.fetch_add(1, Ordering::Relaxed);
        self.io.graph_bytes_read.fetch_add(BLOCK_SIZE as u64, Ordering::Relaxed);
        Ok(buf)
    }

    /// One-block read returning the still-compressed list (cache insert path).
    pub fn read_encoded(&self, vertex: u32) -> Result<EncodedNeighborList> {
        let block_idx = self.block_of(vertex)?;
        let block = self.read_block(block_idx)?;
        let view = BlockView::new(&block, block_idx as u64)?;
        let slot = (vertex - self.boundaries[block_idx]) as usize;
        let (item, _) = view.item(slot)?;
        EncodedNeighborList::from_bytes(item, self.universe).map_err(|e| match e {
            Error::Corruption { reason, .. } => {
                Error::Corruption { block: block_idx as u64, reason }
            }
            other => other,
        })
    }

    /// Sparse-index lookup, one block read, one slot decode.
    pub fn read_neighbor_list(&self, vertex: u32) -> Result<Vec<u32>> {
        Ok(ef_decode(&self.read_encoded(vertex)?))
    }

    /// Sequential full decode (merge path); one pass over the file.
    pub fn read_all(&self) -> Result<Vec<Vec<u32>>> {
        let mut out: Vec<Vec<u32>> = Vec::with_capacity(self.universe as usize);
        for (block_idx, &first) in self.boundaries.iter().enumerate() {
            debug_assert_eq!(first as usize, out.len());
            let block = self.read_block(block_idx)?;
            let view = BlockView::new(&block, block_idx as u64)?;
            for slot in 0..view.count() {
                let (item, _) = view.item(slot)?;
                let enc = EncodedNeighborList::from_bytes(item, self.universe)?;
                out.push(ef_decode(&enc));
            }
        }
        if out.len() != self.universe as usize {
            return Err(Error::Corruption {
                block: 0,
                reason: format!("graph holds {} lists for universe {}", out.len(), self.universe),
            });
        }
        Ok(out)
    }

    /// `(first_vertex, item_count)` for one block, reading its header.
    pub fn block_span(&self, block_idx: usize) -> Result<(u32, u32)> {
        let block = self.read_block(block_idx)?;
        let view = BlockView::new(&block, block_idx as u64)?;
        Ok((self.boundaries[block_idx], view.count() as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::elias_fano::ef_worst_case_bits;
    use std::collections::HashSet;

    fn io() -> Arc<IoStats> {
        Arc::new(IoStats::default())
    }

    #[test]
    fn single_neighbor_lists_pack_many_per_block() {
        let dir = tempfile::tempdir().unwrap();
        let n = 2000u32;
        let adjacency: Vec<Vec<u32>> = (0..n).map(|v| vec![(v + 1) % n]).collect();
        let (bytes, blocks) = write_graph_index(dir.path(), &adjacency, n).unwrap();
        assert_eq!(bytes, blocks as u64 * BLOCK_SIZE as u64);
        let g = GraphStore::open(dir.path(), io()).unwrap();
        assert!(g.num_blocks() < n / 100, "expected dense packing, got {} blocks", g.num_blocks());
        assert!(g.boundaries().windows(2).all(|w| w[0] < w[1]));
        // decode-all equals the input as sets
        let all = g.read_all().unwrap();
        for (v, list) in all.iter().enumerate() {
            let a: HashSet<u32> = list.iter().copied().collect();
            let b: HashSet<u32> = adjacency[v].iter().copied().collect();
            assert_eq!(a, b, "vertex {v}");
        }
    }

    #[test]
    fn random_lists_round_trip_and_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let dir = tempfile::tempdir().unwrap();
        let n = 600u32;
        let r = 24usize;
        let adjacency: Vec<Vec<u32>> = (0..n)
            .map(|v| {
                let mut set = HashSet::new();
                while set.len() < r {
                    let x = rng.random_range(0..n);
                    if x != v {
                        set.insert(x);
                    }
                }
                set.into_iter().collect()
            })
            .collect();
        let (_, blocks) = write_graph_index(dir.path(), &adjacency, n).unwrap();
        let g = GraphStore::open(dir.path(), io()).unwrap();

        for v in 0..n {
            let got = g.read_neighbor_list(v).unwrap();
            let mut expect = adjacency[v as usize].clone();
            expect.sort_unstable();
            assert_eq!(got, expect);
        }
        // boundary vertex decodes at slot 0 by construction
        let first = g.boundaries()[1];
        assert_eq!(g.block_span(1).unwrap().0, first);

        // file size respects the worst-case packing bound
        let worst_item = 3 + ef_worst_case_bits(r as u64, n as u64).unwrap().div_ceil(8);
        let payload = (BLOCK_SIZE - 2) as u64 / (worst_item + 2);
        let max_blocks = (n as u64).div_ceil(payload);
        assert!(blocks as u64 <= max_blocks);
    }

    #[test]
    fn lookup_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_graph_index(dir.path(), &[vec![1], vec![0]], 2).unwrap();
        let g = GraphStore::open(dir.path(), io()).unwrap();
        assert!(matches!(g.read_neighbor_list(2), Err(Error::Lookup(_))));
        assert!(matches!(
            write_graph_index(dir.path(), &[vec![5], vec![0]], 2),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn empty_lists_are_placeholders() {
        let dir = tempfile::tempdir().unwrap();
        let adjacency = vec![vec![2], vec![], vec![0]];
        write_graph_index(dir.path(), &adjacency, 3).unwrap();
        let g = GraphStore::open(dir.path(), io()).unwrap();
        assert_eq!(g.read_neighbor_list(1).unwrap(), Vec::<u32>::new());
        assert_eq!(g.read_neighbor_list(2).unwrap(), vec![0]);
    }

    #[test]
    fn builder_copy_block_preserves_layout() {
        let dir = tempfile::tempdir().unwrap();
        let n = 500u32;
        let adjacency: Vec<Vec<u32>> = (0..n).map(|v| vec![v / 2, (v + 7) % n]).collect();
        write_graph_index(dir.path(), &adjacency, n).unwrap();
        let g = GraphStore::open(dir.path(), io()).unwrap();

        // rebuild by copying every block verbatim; result must be identical
        let mut b = GraphFileBuilder::new(n);
        for i in 0..g.num_blocks() as usize {
            let (first, count) = g.block_span(i).unwrap();
            b.copy_block(&g.read_block(i).unwrap(), first, count).unwrap();
        }
        let (data, boundaries) = b.finish();
        assert_eq!(data, std::fs::read(dir.path().join("graph.data")).unwrap());
        assert_eq!(boundaries, g.boundaries());
    }
}
