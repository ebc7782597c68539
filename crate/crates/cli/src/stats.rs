//! `quiver stats`: storage breakdown of a store directory.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use quiver::engine::colocated_baseline_bytes;
use serde::Serialize;

use crate::common::walk;

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Store directory.
    #[arg(long)]
    pub store: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StorageBreakdown {
    pub vectors: u64,
    pub dim: usize,
    pub vector_bytes_each: u64,
    pub max_degree: u64,
    /// Segment `.data` files (sealed and mutable).
    pub vector_data_bytes: u64,
    /// Segment `.meta` files in full (header + frequency table + chunks).
    pub segment_meta_bytes: u64,
    /// Chunk-entry portion of the metadata files alone (the beta budget).
    pub chunk_metadata_bytes: u64,
    pub graph_bytes: u64,
    pub sparse_index_bytes: u64,
    pub pq_codebook_bytes: u64,
    pub pq_codes_bytes: u64,
    pub tombstone_bytes: u64,
    pub idmap_bytes: u64,
    pub store_json_bytes: u64,
    pub other_bytes: u64,
    /// Sum of every file in the directory (equals the component sum).
    pub decoupled_total_bytes: u64,
    /// Analytic page-aligned co-located layout for the same (N, V, R).
    pub colocated_baseline_bytes: u64,
    /// Internal fragmentation the baseline pays: baseline - N * entry.
    pub fragmentation_reclaimed_bytes: u64,
}

pub fn storage_breakdown(dir: &Path) -> Result<StorageBreakdown> {
    let store = quiver::layout::VectorStore::open(dir)?;
    let cfg = store.config();
    let v = cfg.vector_width() as u64;
    let mut b = StorageBreakdown {
        dim: cfg.dim,
        vector_bytes_each: v,
        max_degree: cfg.max_degree as u64,
        ..Default::default()
    };
    let chunk_entry_bytes: u64 = store
        .manifests()
        .iter()
        .flat_map(|m| m.chunks.iter())
        .map(|c| quiver::layout::ChunkMetadata::serialized_len(c.num_blocks as usize, v as usize) as u64)
        .sum();
    b.chunk_metadata_bytes = chunk_entry_bytes;

    for (path, size) in walk(dir)? {
        let name = path.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
        b.decoupled_total_bytes += size;
        if name.ends_with(".data") && path.parent().and_then(Path::file_name) == Some("segments".as_ref()) {
            b.vector_data_bytes += size;
        } else if name.ends_with(".meta") {
            b.segment_meta_bytes += size;
        } else {
            match name.as_str() {
                "graph.data" => b.graph_bytes = size,
                "graph.sparse" => b.sparse_index_bytes = size,
                "pq.codebook" => b.pq_codebook_bytes = size,
                "pq.codes" => b.pq_codes_bytes = size,
                "tombstones.log" => b.tombstone_bytes = size,
                "idmap.0" => b.idmap_bytes = size,
                "store.json" => b.store_json_bytes = size,
                _ => b.other_bytes += size,
            }
        }
    }

    // baseline over the indexed universe
    let universe = graph_universe(dir)?;
    b.vectors = universe as u64;
    b.colocated_baseline_bytes = colocated_baseline_bytes(b.vectors, v, cfg.max_degree as u64);
    let raw_entry = v + 4 * (cfg.max_degree as u64 + 1);
    b.fragmentation_reclaimed_bytes =
        b.colocated_baseline_bytes.saturating_sub(b.vectors * raw_entry);
    Ok(b)
}

fn graph_universe(dir: &Path) -> Result<u32> {
    let sparse = std::fs::read(dir.join("graph.sparse"))?;
    anyhow::ensure!(sparse.len() >= 16, "sparse index too short");
    Ok(u32::from_le_bytes(sparse[12..16].try_into().unwrap()))
}

pub fn run(args: StatsArgs) -> Result<()> {
    let b = storage_breakdown(&args.store)?;
    println!("{}", serde_json::to_string(&b)?);
    eprintln!(
        "store {}: {} vectors, {} bytes decoupled vs {} baseline ({:.1}%), fragmentation reclaimed {}",
        args.store.display(),
        b.vectors,
        b.decoupled_total_bytes,
        b.colocated_baseline_bytes,
        100.0 * b.decoupled_total_bytes as f64 / b.colocated_baseline_bytes.max(1) as f64,
        b.fragmentation_reclaimed_bytes,
    );
    Ok(())
}
