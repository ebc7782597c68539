//! In-memory graph over buffered inserts, searched as an overlay until the
//! next merge folds it into the on-disk index.

use std::collections::HashMap;

use crate::index::vamana::{greedy_search_mem, robust_prune};

#[derive(Debug, Default)]
pub struct MemIndex {
    adjacency: HashMap<u32, Vec<u32>>,
    vectors: HashMap<u32, Vec<f32>>,
    codes: HashMap<u32, Vec<u8>>,
    entry: Option<u32>,
}

impl MemIndex {
    pub fn new() -> MemIndex {
        MemIndex::default()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn entry(&self) -> Option<u32> {
        self.entry
    }

    pub fn neighbors(&self, id: u32) -> Option<&Vec<u32>> {
        self.adjacency.get(&id)
    }

    pub fn vector(&self, id: u32) -> Option<&Vec<f32>> {
        self.vectors.get(&id)
    }

    pub fn code(&self, id: u32) -> Option<&Vec<u8>> {
        self.codes.get(&id)
    }

    pub fn buffered_ids_sorted(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.vectors.keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    /// Inserts a vertex: greedy search from the overlay entry point, prune
    /// the visited set into its list, then add pruned reverse edges.
    pub fn insert(&mut self, id: u32, vector: Vec<f32>, code: Vec<u8>, r: usize, l_build: usize, alpha: f32) {
        self.vectors.insert(id, vector);
        self.codes.insert(id, code);
        let Some(entry) = self.entry else {
            self.entry = Some(id);
            self.adjacency.insert(id, Vec::new());
            return;
        };
        let vectors = &self.vectors;
        let pair = |a: u32, b: u32| crate::distance::l2_sq(&vectors[&a], &vectors[&b]);
        let outcome = greedy_search_mem(
            entry,
            l_build,
            |u| pair(u, id),
            |u, buf| {
                buf.clear();
                if let Some(list) = self.adjacency.get(&u) {
                    buf.extend_from_slice(list);
                }
            },
        );
        let cands: Vec<(u32, f32)> =
            outcome.visited.into_iter().filter(|&(u, _)| u != id).collect();
        let mut list = robust_prune(&cands, r, alpha, pair);
        list.retain(|&u| u != id);
        for &u in &list {
            let ulist = self.adjacency.entry(u).or_default();
            if !ulist.contains(&id) {
                ulist.push(id);
                if ulist.len() > r {
                    let cands: Vec<(u32, f32)> = ulist.iter().map(|&w| (w, pair(w, u))).collect();
                    let pruned = robust_prune(&cands, r, alpha, pair);
                    self.adjacency.insert(u, pruned);
                }
            }
        }
        self.adjacency.insert(id, list);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f32, y: f32) -> Vec<f32> {
        vec![x, y]
    }

    #[test]
    fn overlay_grows_and_bounds_degree() {
        let mut m = MemIndex::new();
        for i in 0..40u32 {
            let p = v((i % 8) as f32, (i / 8) as f32);
            m.insert(i, p, vec![0u8; 2], 4, 8, 1.2);
        }
        assert_eq!(m.len(), 40);
        assert_eq!(m.entry(), Some(0));
        for (id, list) in (0..40u32).filter_map(|i| m.neighbors(i).map(|l| (i, l))) {
            assert!(list.len() <= 4, "vertex {id} degree {}", list.len());
            assert!(!list.contains(&id));
        }
    }

    #[test]
    fn inserted_point_is_findable() {
        let mut m = MemIndex::new();
        for i in 0..30u32 {
            m.insert(i, v(i as f32, 0.0), vec![0u8; 2], 4, 8, 1.2);
        }
        let query = v(17.2, 0.0);
        let out = greedy_search_mem(
            m.entry().unwrap(),
            8,
            |u| crate::distance::l2_sq(m.vector(u).unwrap(), &query),
            |u, buf| {
                buf.clear();
                if let Some(l) = m.neighbors(u) {
                    buf.extend_from_slice(l);
                }
            },
        );
        assert_eq!(out.top[0].0, 17);
    }
}
