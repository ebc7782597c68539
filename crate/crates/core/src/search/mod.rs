//! Query-time engine: beam search over the compressed graph with an LRU
//! neighbor cache, stability-triggered vector prefetch, and benefit-ratio
//! re-rank termination.

pub mod beam;
pub mod cache;

use std::collections::BinaryHeap;

use serde::Serialize;

use crate::distance::l2_sq;
use crate::error::{Error, Result};

pub use beam::{beam_search, SearchContext};
pub use cache::{cache_lookup, NeighborCache};

/// Query-time knobs.
#[derive(Debug, Clone)]
pub struct SearchParams {
    /// Result size K.
    pub k: usize,
    /// Candidate list size L_s.
    pub l_search: usize,
    /// Beam width W.
    pub beam_width: usize,
    /// Re-rank batch size B.
    pub rerank_batch: usize,
    /// Early-termination benefit threshold.
    pub benefit_threshold: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams { k: 10, l_search: 100, beam_width: 4, rerank_batch: 10, benefit_threshold: 0.01 }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.l_search {
            return Err(Error::usage(format!(
                "need 1 <= K <= L_s, got K={} L_s={}",
                self.k, self.l_search
            )));
        }
        if self.beam_width == 0 || self.rerank_batch == 0 {
            return Err(Error::usage("beam width and re-rank batch must be positive"));
        }
        if !(0.0..=1.0).contains(&self.benefit_threshold) {
            return Err(Error::usage("benefit threshold must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Per-query counters (the bench stream emits one JSON object per query).
#[derive(Debug, Clone, Default, Serialize)]
pub struct QueryStats {
    pub query_id: u64,
    pub latency_us: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    pub cache_hits: u64,
    pub cache_misses: u64,
    /// Neighbor-list disk reads (graph traversal path).
    pub graph_ios: u64,
    /// Full-precision vector reads (prefetch + re-rank paths only).
    pub vector_ios: u64,
    /// Subset of `vector_ios` issued by the stability prefetcher.
    pub prefetch_ios: u64,
    pub pq_evals: u64,
    pub reranked: u32,
    pub terminated_early: bool,
    pub read_errors: u32,
}

/// Max-heap entry ordered by (distance, id); the worst candidate sits on top.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem(f32, u32);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Bounded max-heap of the best candidates seen during traversal, sized
/// K + B; feeds the vector prefetcher once the search stabilizes.
#[derive(Debug)]
pub struct PrefetchHeap {
    heap: BinaryHeap<HeapItem>,
    cap: usize,
}

impl PrefetchHeap {
    pub fn new(cap: usize) -> PrefetchHeap {
        PrefetchHeap { heap: BinaryHeap::with_capacity(cap + 1), cap }
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.cap
    }

    /// Inserts if the candidate improves the retained set; returns whether
    /// the heap changed.
    pub fn try_insert(&mut self, id: u32, dist: f32) -> bool {
        if self.heap.len() < self.cap {
            self.heap.push(HeapItem(dist, id));
            return true;
        }
        let worst = *self.heap.peek().expect("nonempty");
        if HeapItem(dist, id) < worst {
            self.heap.pop();
            self.heap.push(HeapItem(dist, id));
            return true;
        }
        false
    }

    /// Retained candidates, best first.
    pub fn contents_sorted(&self) -> Vec<(u32, f32)> {
        let mut v: Vec<HeapItem> = self.heap.iter().copied().collect();
        v.sort();
        v.into_iter().map(|HeapItem(d, id)| (id, d)).collect()
    }
}

/// The search is stable once the heap is full and `B` consecutive explored
/// candidates failed to update it.
pub fn is_stable(heap: &PrefetchHeap, consecutive_non_updates: usize, b: usize) -> bool {
    heap.is_full() && consecutive_non_updates >= b
}

/// Prefetch slots left over after in-flight graph fetches claim the beam.
pub fn prefetch_budget(beam_width: usize, inflight_graph_ios: usize) -> usize {
    beam_width.saturating_sub(inflight_graph_ios)
}

/// Result of the re-rank phase.
#[derive(Debug, Clone)]
pub struct RerankOutcome {
    /// Top-K by exact distance, ascending.
    pub top: Vec<(u32, f32)>,
    pub reranked: usize,
    pub terminated_early: bool,
    pub read_errors: u32,
}

/// Re-ranks PQ-ordered candidates in batches of `b` against full-precision
/// vectors, stopping once a batch's benefit ratio (fraction of fetches that
/// improved the final top-K heap) drops below `threshold`. Failed reads are
/// skipped and counted as non-updates.
pub fn rerank(
    query: &[f32],
    ranked: &[(u32, f32)],
    mut fetch: impl FnMut(u32) -> Result<Vec<f32>>,
    k: usize,
    b: usize,
    threshold: f64,
) -> RerankOutcome {
    let mut heap: BinaryHeap<HeapItem> = BinaryHeap::with_capacity(k + 1);
    let mut reranked = 0usize;
    let mut read_errors = 0u32;
    let mut terminated_early = false;
    for batch in ranked.chunks(b.max(1)) {
        let mut updates = 0usize;
        for &(id, _) in batch {
            reranked += 1;
            match fetch(id) {
                Ok(v) => {
                    let d = l2_sq(query, &v);
                    if heap.len() < k {
                        heap.push(HeapItem(d, id));
                        updates += 1;
                    } else if HeapItem(d, id) < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(HeapItem(d, id));
                        updates += 1;
                    }
                }
                Err(_) => read_errors += 1,
            }
        }
        let ratio = updates as f64 / batch.len() as f64;
        if ratio < threshold {
            terminated_early = reranked < ranked.len();
            break;
        }
    }
    let mut top: Vec<HeapItem> = heap.into_vec();
    top.sort();
    RerankOutcome {
        top: top.into_iter().map(|HeapItem(d, id)| (id, d)).collect(),
        reranked,
        terminated_early,
        read_errors,
    }
}
