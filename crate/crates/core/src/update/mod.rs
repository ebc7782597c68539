//! Batched streaming updates: the in-memory insert overlay, tombstone-driven
//! delete consolidation, block-sparse graph merges, and segment GC.

pub mod gc;
pub mod mem_index;
pub mod merge;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::index::vamana::robust_prune;

pub use gc::{run_gc, GcOutcome};
pub use mem_index::MemIndex;
pub use merge::{commit_merge, stage_merge, MergeInput, StagedMerge};

/// Per-merge accounting, one JSON object per merge on the bench stream.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MergeStats {
    pub merge_delete_seconds: f64,
    pub merge_insert_seconds: f64,
    /// Re-encoded (affected + appended) graph blocks; copied blocks excluded.
    pub graph_blocks_rewritten: u64,
    pub vector_bytes_written: u64,
    pub gc_bytes_reclaimed: u64,
    pub inserted: u64,
    pub deleted_applied: u64,
}

/// Removes every reference to deleted vertices: each surviving vertex with
/// deleted neighbors re-prunes over its surviving neighbors plus the
/// surviving neighbors of its deleted neighbors; deleted vertices' own lists
/// are dropped. Returns the surviving vertices that were rewritten.
pub fn consolidate_deletes<D>(
    adjacency: &mut [Vec<u32>],
    deleted: &HashSet<u32>,
    r: usize,
    alpha: f32,
    dist: D,
) -> Vec<u32>
where
    D: Fn(u32, u32) -> f32 + Sync,
{
    if deleted.is_empty() {
        return Vec::new();
    }
    let affected: Vec<u32> = (0..adjacency.len() as u32)
        .into_par_iter()
        .filter(|v| {
            !deleted.contains(v) && adjacency[*v as usize].iter().any(|n| deleted.contains(n))
        })
        .collect();
    let rewritten: Vec<(u32, Vec<u32>)> = affected
        .par_iter()
        .map(|&u| {
            let mut cands: Vec<(u32, f32)> = Vec::new();
            let mut seen = HashSet::new();
            for &n in &adjacency[u as usize] {
                if deleted.contains(&n) {
                    for &nn in &adjacency[n as usize] {
                        if nn != u && !deleted.contains(&nn) && seen.insert(nn) {
                            cands.push((nn, dist(u, nn)));
                        }
                    }
                } else if n != u && seen.insert(n) {
                    cands.push((n, dist(u, n)));
                }
            }
            (u, robust_prune(&cands, r, alpha, &dist))
        })
        .collect();
    for (u, list) in rewritten {
        adjacency[u as usize] = list;
    }
    for &d in deleted {
        if (d as usize) < adjacency.len() {
            adjacency[d as usize].clear();
        }
    }
    affected
}
