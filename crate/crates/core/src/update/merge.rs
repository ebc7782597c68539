//! Merge-Delete and Merge-Insert: folds buffered inserts and tombstoned
//! deletes into the on-disk graph, rewriting only the blocks whose vertices
//! changed. Staging writes `*.tmp` files only; a crash before commit leaves
//! the old index fully intact.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::index::pq::PQCodebook;
use crate::index::vamana::{greedy_search_mem, robust_prune};
use crate::layout::graph_file::{GraphFileBuilder, GraphStore};
use crate::layout::store::{write_durable, VectorStore};
use crate::update::{consolidate_deletes, MergeStats};

pub struct MergeInput<'a> {
    pub store: &'a VectorStore,
    pub graph: &'a GraphStore,
    pub entry_point: Option<u32>,
    pub codebook: &'a PQCodebook,
    /// Flat PQ codes for ids below the graph universe.
    pub disk_codes: &'a [u8],
    /// Live buffered inserts: (id, vector, code), ascending by id.
    pub buffered: Vec<(u32, Vec<f32>, Vec<u8>)>,
    pub max_degree: usize,
    pub build_list_size: usize,
    pub prune_alpha: f32,
}

/// A fully staged merge: `graph.data.tmp`, `graph.sparse.tmp`, and
/// `pq.codes.tmp` are on disk; nothing visible has changed yet.
pub struct StagedMerge {
    pub new_universe: u32,
    pub new_entry: Option<u32>,
    pub stats: MergeStats,
}

/// Computes the post-merge graph and stages it next to the live files.
pub fn stage_merge(input: MergeInput<'_>) -> Result<StagedMerge> {
    let MergeInput {
        store,
        graph,
        entry_point,
        codebook,
        disk_codes,
        buffered,
        max_degree,
        build_list_size,
        prune_alpha,
    } = input;
    let deleted = store.tombstones_snapshot();
    if buffered.is_empty() && deleted.is_empty() {
        return Err(Error::usage("nothing to merge: no buffered inserts or tombstones"));
    }
    let old_universe = graph.universe();
    let new_universe = store.next_id();
    let dim = codebook.dim();
    let m = codebook.m;

    // live full-precision vectors, one sequential pass over the store
    let mut flat = vec![0.0f32; new_universe as usize * dim];
    let mut live = vec![false; new_universe as usize];
    store.for_each_live(|id, bytes| {
        let mut buf = Vec::with_capacity(dim);
        store.config().element_type.decode_f32(bytes, &mut buf);
        flat[id as usize * dim..(id as usize + 1) * dim].copy_from_slice(&buf);
        live[id as usize] = true;
        Ok(())
    })?;
    let vec_of = |id: u32| &flat[id as usize * dim..(id as usize + 1) * dim];
    let dist = |a: u32, b: u32| crate::distance::l2_sq(vec_of(a), vec_of(b));

    let mut stats = MergeStats::default();
    let mut affected: HashSet<u32> = HashSet::new();

    // Merge-Delete
    let t0 = Instant::now();
    let mut adjacency = graph.read_all()?;
    let deleted_in_graph: HashSet<u32> =
        deleted.iter().copied().filter(|&d| d < old_universe).collect();
    for &d in &deleted_in_graph {
        if !adjacency[d as usize].is_empty() {
            affected.insert(d);
        }
    }
    let rewritten = consolidate_deletes(&mut adjacency, &deleted_in_graph, max_degree, prune_alpha, dist);
    stats.deleted_applied = deleted_in_graph.len() as u64;
    affected.extend(rewritten);
    stats.merge_delete_seconds = t0.elapsed().as_secs_f64();

    // entry point: recompute the medoid over live PQ reconstructions when
    // the old one is gone
    let code_of = |id: u32| -> Option<&[u8]> {
        if id < old_universe {
            let start = id as usize * m;
            disk_codes.get(start..start + m)
        } else {
            buffered
                .binary_search_by_key(&id, |(b, _, _)| *b)
                .ok()
                .map(|i| buffered[i].2.as_slice())
        }
    };
    let t1 = Instant::now();
    let entry_deleted = entry_point.map(|e| deleted.contains(&e)).unwrap_or(true);
    let live_ids: Vec<u32> = (0..new_universe).filter(|&id| live[id as usize]).collect();
    let new_entry = if live_ids.is_empty() {
        None
    } else if entry_deleted {
        Some(pq_medoid(&live_ids, code_of, codebook))
    } else {
        entry_point
    };

    // Merge-Insert: search the combined (post-delete + already-inserted)
    // graph for each buffered vertex, prune, and push reverse edges
    adjacency.resize(new_universe as usize, Vec::new());
    if !buffered.is_empty() {
        let entry = new_entry.ok_or_else(|| Error::usage("insert merge with no live entry point"))?;
        for &(v, _, _) in &buffered {
            if deleted.contains(&v) {
                continue;
            }
            let outcome = greedy_search_mem(
                entry,
                build_list_size,
                |u| dist(u, v),
                |u, buf| {
                    buf.clear();
                    buf.extend_from_slice(&adjacency[u as usize]);
                },
            );
            let cands: Vec<(u32, f32)> =
                outcome.visited.into_iter().filter(|&(u, _)| u != v).collect();
            adjacency[v as usize] = robust_prune(&cands, max_degree, prune_alpha, dist);
            affected.insert(v);
            for u in adjacency[v as usize].clone() {
                let list = &mut adjacency[u as usize];
                if !list.contains(&v) {
                    list.push(v);
                    affected.insert(u);
                    if list.len() > max_degree {
                        let cands: Vec<(u32, f32)> = list.iter().map(|&w| (w, dist(w, u))).collect();
                        adjacency[u as usize] = robust_prune(&cands, max_degree, prune_alpha, dist);
                    }
                }
            }
            stats.inserted += 1;
        }
    }

    // block-sparse rewrite: copy untouched old blocks, re-encode the rest
    let mut builder = GraphFileBuilder::new(new_universe);
    let mut copied_blocks = 0u64;
    let boundaries = graph.boundaries();
    for b in 0..boundaries.len() {
        let first = boundaries[b];
        let end = boundaries.get(b + 1).copied().unwrap_or(old_universe);
        let touched = (first..end).any(|v| affected.contains(&v));
        if touched {
            for v in first..end {
                adjacency[v as usize].sort_unstable();
                adjacency[v as usize].dedup();
                builder.push_list(&adjacency[v as usize])?;
            }
        } else {
            builder.copy_block(&graph.read_block(b)?, first, end - first)?;
            copied_blocks += 1;
        }
    }
    for v in old_universe..new_universe {
        adjacency[v as usize].sort_unstable();
        adjacency[v as usize].dedup();
        builder.push_list(&adjacency[v as usize])?;
    }
    let (data, new_boundaries) = builder.finish();
    stats.graph_blocks_rewritten = new_boundaries.len() as u64 - copied_blocks;

    // new PQ code array covering the widened universe
    let mut codes = vec![0u8; new_universe as usize * m];
    let keep = (old_universe as usize * m).min(disk_codes.len());
    codes[..keep].copy_from_slice(&disk_codes[..keep]);
    for (id, _, code) in &buffered {
        codes[*id as usize * m..(*id as usize + 1) * m].copy_from_slice(code);
    }

    let dir = store.dir();
    write_durable(&dir.join("graph.data.tmp"), &data)?;
    write_durable(&dir.join("graph.sparse.tmp"), &encode_sparse_for(&new_boundaries, new_universe))?;
    write_durable(&dir.join("pq.codes.tmp"), &codes)?;
    stats.merge_insert_seconds = t1.elapsed().as_secs_f64();
    Ok(StagedMerge { new_universe, new_entry, stats })
}

fn encode_sparse_for(boundaries: &[u32], universe: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + boundaries.len() * 4);
    out.extend_from_slice(&crate::layout::graph_file::SPARSE_MAGIC.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(boundaries.len() as u32).to_le_bytes());
    out.extend_from_slice(&universe.to_le_bytes());
    for b in boundaries {
        out.extend_from_slice(&b.to_le_bytes());
    }
    out
}

/// Atomically swaps the staged files in (data, then sparse, then codes) and
/// persists the new entry point.
pub fn commit_merge(dir: &Path, staged: &StagedMerge, store: &VectorStore) -> Result<()> {
    for (tmp, live) in [
        ("graph.data.tmp", "graph.data"),
        ("graph.sparse.tmp", "graph.sparse"),
        ("pq.codes.tmp", "pq.codes"),
    ] {
        std::fs::rename(dir.join(tmp), dir.join(live)).map_err(|e| Error::io(dir.join(live), e))?;
    }
    if let Ok(d) = std::fs::File::open(dir) {
        let _ = d.sync_all();
    }
    store.set_entry_point(staged.new_entry)
}

/// Medoid over PQ reconstructions of the live ids (the full-precision
/// vectors may be arbitrarily large; codes are always in memory).
fn pq_medoid<'a>(live_ids: &[u32], code_of: impl Fn(u32) -> Option<&'a [u8]>, codebook: &PQCodebook) -> u32 {
    let dim = codebook.dim();
    let mut mean = vec![0.0f64; dim];
    let mut recons: Vec<(u32, Vec<f32>)> = Vec::with_capacity(live_ids.len());
    for &id in live_ids {
        let Some(code) = code_of(id) else { continue };
        let r = codebook.reconstruct(code);
        for (m, &v) in mean.iter_mut().zip(&r) {
            *m += v as f64;
        }
        recons.push((id, r));
    }
    if recons.is_empty() {
        return live_ids[0];
    }
    let n = recons.len() as f64;
    let mean: Vec<f32> = mean.iter().map(|&s| (s / n) as f32).collect();
    recons
        .iter()
        .map(|(id, r)| (*id, crate::distance::l2_sq(r, &mean)))
        .fold((recons[0].0, f32::INFINITY), |acc, (id, d)| if d < acc.1 { (id, d) } else { acc })
        .0
}
