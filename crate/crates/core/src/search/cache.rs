//! Fixed-entry LRU cache of compressed neighbor lists.
//!
//! Every resident entry owns an identically sized buffer derived from the
//! Elias-Fano worst case for the store's degree bound, so cache memory is
//! exactly `capacity * entry_size` regardless of per-list sizes. Entries
//! hold the still-compressed list; hits decode on the way out.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::Mutex;

use crate::codec::elias_fano::{ef_decode, ef_worst_case_bits, EncodedNeighborList};
use crate::error::Result;
use crate::layout::graph_file::GraphStore;

const NIL: usize = usize::MAX;

struct Slot {
    key: u32,
    /// Used prefix of the fixed buffer.
    len: u16,
    buf: Box<[u8]>,
    prev: usize,
    next: usize,
}

struct LruInner {
    map: HashMap<u32, usize>,
    slots: Vec<Slot>,
    head: usize,
    tail: usize,
}

impl LruInner {
    fn unlink(&mut self, i: usize) {
        let (prev, next) = (self.slots[i].prev, self.slots[i].next);
        if prev == NIL {
            self.head = next;
        } else {
            self.slots[prev].next = next;
        }
        if next == NIL {
            self.tail = prev;
        } else {
            self.slots[next].prev = prev;
        }
    }

    fn push_front(&mut self, i: usize) {
        self.slots[i].prev = NIL;
        self.slots[i].next = self.head;
        if self.head != NIL {
            self.slots[self.head].prev = i;
        }
        self.head = i;
        if self.tail == NIL {
            self.tail = i;
        }
    }
}

pub struct NeighborCache {
    capacity: usize,
    entry_size: usize,
    universe: u32,
    inner: Mutex<LruInner>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl NeighborCache {
    /// `capacity` in entries; entry size follows the worst-case bound for
    /// `max_degree`-length lists over `universe` ids (2-byte count prefix).
    pub fn new(capacity: usize, max_degree: u32, universe: u32) -> NeighborCache {
        let r = (max_degree.max(1) as u64).min(universe.max(1) as u64);
        let worst = ef_worst_case_bits(r, universe.max(1) as u64).unwrap_or(0);
        let entry_size = 2 + (worst as usize).div_ceil(8);
        NeighborCache {
            capacity: capacity.max(1),
            entry_size,
            universe,
            inner: Mutex::new(LruInner { map: HashMap::new(), slots: Vec::new(), head: NIL, tail: NIL }),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn entry_size(&self) -> usize {
        self.entry_size
    }

    pub fn len(&self) -> usize {
        self.inner.lock().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hit_count(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn miss_count(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    fn get(&self, key: u32) -> Option<Vec<u8>> {
        let mut inner = self.inner.lock();
        let &i = inner.map.get(&key)?;
        inner.unlink(i);
        inner.push_front(i);
        let slot = &inner.slots[i];
        Some(slot.buf[..slot.len as usize].to_vec())
    }

    fn insert(&self, key: u32, packed: &[u8]) {
        debug_assert!(packed.len() <= self.entry_size, "packed entry exceeds fixed size");
        let mut inner = self.inner.lock();
        if inner.map.contains_key(&key) {
            return;
        }
        let i = if inner.map.len() >= self.capacity {
            // evict the least recently used entry and reuse its buffer
            let victim = inner.tail;
            inner.unlink(victim);
            let old_key = inner.slots[victim].key;
            inner.map.remove(&old_key);
            victim
        } else {
            inner.slots.push(Slot {
                key,
                len: 0,
                buf: vec![0u8; self.entry_size].into_boxed_slice(),
                prev: NIL,
                next: NIL,
            });
            inner.slots.len() - 1
        };
        let slot = &mut inner.slots[i];
        slot.key = key;
        slot.len = packed.len() as u16;
        slot.buf[..packed.len()].copy_from_slice(packed);
        inner.map.insert(key, i);
        inner.push_front(i);
    }
}

/// Returns the decoded neighbor list and whether it was a cache hit; misses
/// read one graph block and insert the compressed form.
pub fn cache_lookup(cache: &NeighborCache, graph: &GraphStore, vertex: u32) -> Result<(Vec<u32>, bool)> {
    if let Some(packed) = cache.get(vertex) {
        cache.hits.fetch_add(1, Ordering::Relaxed);
        let enc = EncodedNeighborList::from_packed(&packed, cache.universe)?;
        return Ok((ef_decode(&enc), true));
    }
    cache.misses.fetch_add(1, Ordering::Relaxed);
    let enc = graph.read_encoded(vertex)?;
    cache.insert(vertex, &enc.to_packed());
    Ok((ef_decode(&enc), false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::graph_file::write_graph_index;
    use crate::layout::store::IoStats;
    use std::sync::Arc;

    fn graph_fixture(n: u32) -> (tempfile::TempDir, GraphStore) {
        let dir = tempfile::tempdir().unwrap();
        let adjacency: Vec<Vec<u32>> = (0..n).map(|v| vec![(v + 1) % n, (v + 2) % n]).collect();
        write_graph_index(dir.path(), &adjacency, n).unwrap();
        let g = GraphStore::open(dir.path(), Arc::new(IoStats::default())).unwrap();
        (dir, g)
    }

    #[test]
    fn second_lookup_hits() {
        let (_d, g) = graph_fixture(50);
        let cache = NeighborCache::new(8, 2, 50);
        let (a, hit_a) = cache_lookup(&cache, &g, 7).unwrap();
        let (b, hit_b) = cache_lookup(&cache, &g, 7).unwrap();
        assert!(!hit_a);
        assert!(hit_b);
        assert_eq!(a, b);
        assert_eq!(cache.hit_count(), 1);
        assert_eq!(cache.miss_count(), 1);
    }

    #[test]
    fn capacity_one_thrashes() {
        let (_d, g) = graph_fixture(50);
        let cache = NeighborCache::new(1, 2, 50);
        for v in [1u32, 2, 1] {
            cache_lookup(&cache, &g, v).unwrap();
        }
        assert_eq!(cache.hit_count(), 0);
        assert_eq!(cache.miss_count(), 3);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn hits_match_fresh_disk_reads() {
        let (_d, g) = graph_fixture(200);
        let cache = NeighborCache::new(64, 2, 200);
        for v in 0..200u32 {
            cache_lookup(&cache, &g, v % 40).unwrap();
        }
        for v in 0..40u32 {
            let (cached, _) = cache_lookup(&cache, &g, v).unwrap();
            assert_eq!(cached, g.read_neighbor_list(v).unwrap(), "vertex {v}");
        }
    }

    #[test]
    fn entry_size_bounds_all_lists() {
        let (_d, g) = graph_fixture(300);
        let cache = NeighborCache::new(4, 2, 300);
        for v in 0..300u32 {
            let enc = g.read_encoded(v).unwrap();
            assert!(enc.to_packed().len() <= cache.entry_size());
        }
    }
}
