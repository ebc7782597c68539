//! Beam search over the compressed on-disk graph with PQ-guided traversal.
//!
//! Traversal touches only the auxiliary index (neighbor lists through the
//! LRU cache); full-precision vectors are read exclusively by the stability
//! prefetcher and the final re-rank, keeping vector I/O off the critical
//! path. Tombstoned ids still navigate but never reach the result heap.

use std::collections::{HashMap, HashSet};

use parking_lot::RwLock;

use crate::error::Result;
use crate::index::pq::{pq_asym_distance, pq_distance_table, PQCodebook};
use crate::layout::graph_file::GraphStore;
use crate::search::cache::{cache_lookup, NeighborCache};
use crate::search::{is_stable, prefetch_budget, rerank, PrefetchHeap, QueryStats, SearchParams};
use crate::update::MemIndex;

/// One immutable generation of the searchable graph.
pub struct GraphState {
    pub store: GraphStore,
    pub cache: NeighborCache,
    pub entry_point: Option<u32>,
}

/// Borrowed view of everything one query needs.
pub struct SearchContext<'a> {
    pub graph: &'a GraphState,
    pub mem: Option<&'a RwLock<MemIndex>>,
    pub codebook: &'a PQCodebook,
    /// Flat PQ codes for ids below the graph universe.
    pub disk_codes: &'a [u8],
    pub is_deleted: &'a dyn Fn(u32) -> bool,
    /// Full-precision read, decoded to f32 (prefetch / re-rank only).
    pub read_vector: &'a dyn Fn(u32) -> Result<Vec<f32>>,
}

impl SearchContext<'_> {
    fn pq_code(&self, id: u32) -> Option<Vec<u8>> {
        let m = self.codebook.m;
        let universe = self.graph.store.universe();
        if id < universe {
            let start = id as usize * m;
            self.disk_codes.get(start..start + m).map(|c| c.to_vec())
        } else {
            self.mem.and_then(|mem| mem.read().code(id).cloned())
        }
    }

    fn neighbors(&self, v: u32, stats: &mut QueryStats) -> Result<Vec<u32>> {
        if v < self.graph.store.universe() {
            let (list, hit) = cache_lookup(&self.graph.cache, &self.graph.store, v)?;
            if hit {
                stats.cache_hits += 1;
            } else {
                stats.cache_misses += 1;
                stats.graph_ios += 1;
            }
            Ok(list)
        } else {
            Ok(self
                .mem
                .and_then(|mem| mem.read().neighbors(v).cloned())
                .unwrap_or_default())
        }
    }
}

/// Full query: PQ-guided traversal, stability-triggered prefetch, exact
/// re-rank with benefit-ratio termination. Returns the top-K `(id, exact
/// squared distance)` and the query's counters.
pub fn beam_search(
    ctx: &SearchContext<'_>,
    query: &[f32],
    params: &SearchParams,
) -> Result<(Vec<(u32, f32)>, QueryStats)> {
    params.validate()?;
    let mut stats = QueryStats::default();
    let table = pq_distance_table(query, ctx.codebook)?;
    let l = params.l_search;

    // candidate pool ordered by (pq distance, id); bool marks expansion
    let mut pool: Vec<(f32, u32, bool)> = Vec::with_capacity(l + 1);
    let mut seen: HashSet<u32> = HashSet::new();
    let mut heap = PrefetchHeap::new(params.k + params.rerank_batch);
    let mut consecutive_non_updates = 0usize;
    let mut prefetched: HashMap<u32, Vec<f32>> = HashMap::new();
    let mut prefetch_attempted: HashSet<u32> = HashSet::new();

    let push = |pool: &mut Vec<(f32, u32, bool)>,
                    stats: &mut QueryStats,
                    heap: &mut PrefetchHeap,
                    consecutive: &mut usize,
                    id: u32,
                    dist: f32| {
        let at = pool.partition_point(|&(pd, pid, _)| (pd, pid) < (dist, id));
        pool.insert(at, (dist, id, false));
        if pool.len() > l {
            pool.truncate(l);
        }
        if (ctx.is_deleted)(id) {
            *consecutive += 1;
        } else if heap.try_insert(id, dist) {
            *consecutive = 0;
        } else {
            *consecutive += 1;
        }
        stats.pq_evals += 1;
    };

    let mem_entry = ctx.mem.and_then(|m| m.read().entry());
    for entry in [ctx.graph.entry_point, mem_entry].into_iter().flatten() {
        if seen.insert(entry) {
            if let Some(code) = ctx.pq_code(entry) {
                let d = pq_asym_distance(&code, &table);
                push(&mut pool, &mut stats, &mut heap, &mut consecutive_non_updates, entry, d);
            }
        }
    }

    loop {
        // the beam: up to W best unexpanded candidates in the current list
        let beam: Vec<u32> = pool
            .iter()
            .take(l)
            .filter(|&&(_, _, expanded)| !expanded)
            .take(params.beam_width)
            .map(|&(_, id, _)| id)
            .collect();
        if beam.is_empty() {
            break;
        }
        let inflight = beam.len();
        for v in beam {
            if let Some(slot) = pool.iter().position(|&(_, id, _)| id == v) {
                pool[slot].2 = true;
            }
            for u in ctx.neighbors(v, &mut stats)? {
                if !seen.insert(u) {
                    continue;
                }
                let Some(code) = ctx.pq_code(u) else { continue };
                let d = pq_asym_distance(&code, &table);
                push(&mut pool, &mut stats, &mut heap, &mut consecutive_non_updates, u, d);
            }
        }
        // prefetch the stabilized heap contents with the leftover beam slots
        if is_stable(&heap, consecutive_non_updates, params.rerank_batch) {
            let mut budget = prefetch_budget(params.beam_width, inflight);
            for (id, _) in heap.contents_sorted() {
                if budget == 0 {
                    break;
                }
                if !prefetch_attempted.insert(id) {
                    continue;
                }
                budget -= 1;
                match (ctx.read_vector)(id) {
                    Ok(v) => {
                        stats.vector_ios += 1;
                        stats.prefetch_ios += 1;
                        prefetched.insert(id, v);
                    }
                    Err(_) => stats.read_errors += 1,
                }
            }
        }
    }

    // final re-rank over the surviving candidate list
    let ranked: Vec<(u32, f32)> = pool
        .iter()
        .filter(|&&(_, id, _)| !(ctx.is_deleted)(id))
        .map(|&(d, id, _)| (id, d))
        .collect();
    let mut fetch_ios = 0u64;
    let outcome = rerank(
        query,
        &ranked,
        |id| {
            if let Some(v) = prefetched.remove(&id) {
                return Ok(v);
            }
            let v = (ctx.read_vector)(id)?;
            fetch_ios += 1;
            Ok(v)
        },
        params.k,
        params.rerank_batch,
        params.benefit_threshold,
    );
    stats.vector_ios += fetch_ios;
    stats.reranked = outcome.reranked as u32;
    stats.terminated_early = outcome.terminated_early;
    stats.read_errors += outcome.read_errors;
    Ok((outcome.top, stats))
}
