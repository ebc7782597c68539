//! In-memory Vamana-style graph construction: best-first greedy search,
//! alpha-dominance pruning, and a two-pass build over a seeded permutation
//! with reverse-edge insertion.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distance::l2_sq;
use crate::error::{Error, Result};
use crate::types::Dataset;

/// Searches within one build batch run against an immutable adjacency
/// snapshot, which keeps parallel builds deterministic.
const BUILD_BATCH: usize = 64;

#[derive(Debug, Clone)]
pub struct BuildParams {
    /// Degree bound R.
    pub max_degree: usize,
    /// Build-time candidate list size L_b.
    pub build_list_size: usize,
    /// Second-pass pruning slack.
    pub prune_alpha: f32,
    pub seed: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams { max_degree: 96, build_list_size: 100, prune_alpha: 1.2, seed: 0 }
    }
}

/// Dense row-major f32 vectors.
#[derive(Debug, Clone)]
pub struct FlatVectors {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FlatVectors {
    pub fn from_dataset(dataset: &Dataset) -> FlatVectors {
        FlatVectors { dim: dataset.dim(), data: dataset.to_f32_matrix() }
    }

    pub fn count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    #[inline]
    pub fn vector(&self, id: u32) -> &[f32] {
        &self.data[id as usize * self.dim..(id as usize + 1) * self.dim]
    }
}

/// Bounded-degree adjacency plus the fixed entry point (the medoid).
#[derive(Debug, Clone)]
pub struct GraphIndex {
    pub adjacency: Vec<Vec<u32>>,
    pub entry_point: u32,
}

/// Vertex minimizing distance to the dataset mean; ties to the smaller id.
pub fn medoid(vectors: &FlatVectors) -> u32 {
    let n = vectors.count();
    assert!(n > 0);
    let dim = vectors.dim;
    let mut mean = vec![0.0f64; dim];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(vectors.vector(i as u32)) {
            *m += v as f64;
        }
    }
    let mean: Vec<f32> = mean.iter().map(|&s| (s / n as f64) as f32).collect();
    let (best, _) = (0..n as u32)
        .map(|i| (i, l2_sq(vectors.vector(i), &mean)))
        .fold((0u32, f32::INFINITY), |acc, (i, d)| {
            if d < acc.1 {
                (i, d)
            } else {
                acc
            }
        });
    best
}

/// Result of one greedy search: the best `l` candidates seen and the set of
/// expanded vertices, both with distances.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub top: Vec<(u32, f32)>,
    pub visited: Vec<(u32, f32)>,
}

/// Classic best-first search with a candidate list of size `l` over exact
/// distances; terminates when every候 retained candidate has been expanded.
pub fn greedy_search_mem<N, D>(entry: u32, l: usize, mut dist_to_query: D, mut neighbors: N) -> SearchOutcome
where
    N: FnMut(u32, &mut Vec<u32>),
    D: FnMut(u32) -> f32,
{
    assert!(l >= 1);
    // (distance, id, expanded), kept sorted ascending
    let mut pool: Vec<(f32, u32, bool)> = vec![(dist_to_query(entry), entry, false)];
    let mut seen: HashSet<u32> = HashSet::from([entry]);
    let mut visited = Vec::new();
    let mut nbuf = Vec::new();
    loop {
        let Some(next) = pool.iter().take(l).position(|&(_, _, expanded)| !expanded) else {
            break;
        };
        let (d, v, _) = pool[next];
        pool[next].2 = true;
        visited.push((v, d));
        neighbors(v, &mut nbuf);
        for &u in nbuf.iter() {
            if !seen.insert(u) {
                continue;
            }
            let du = dist_to_query(u);
            let at = pool.partition_point(|&(pd, pid, _)| (pd, pid) < (du, u));
            pool.insert(at, (du, u, false));
        }
        if pool.len() > l {
            pool.truncate(l);
        }
    }
    SearchOutcome {
        top: pool.iter().map(|&(d, id, _)| (id, d)).collect(),
        visited,
    }
}

/// Alpha-dominance pruning: repeatedly keep the nearest remaining candidate
/// `p`, dropping every candidate `c` with `alpha * d(p, c) <= d(vertex, c)`,
/// until `r` neighbors are chosen or candidates run out. `candidates` hold
/// distances to the vertex and must exclude the vertex itself.
pub fn robust_prune<D>(candidates: &[(u32, f32)], r: usize, alpha: f32, mut pair_dist: D) -> Vec<u32>
where
    D: FnMut(u32, u32) -> f32,
{
    let mut pool: Vec<(u32, f32)> = candidates.to_vec();
    pool.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    pool.dedup_by_key(|c| c.0);
    let mut out = Vec::with_capacity(r.min(pool.len()));
    let mut alive = vec![true; pool.len()];
    for i in 0..pool.len() {
        if !alive[i] {
            continue;
        }
        let (p, _) = pool[i];
        out.push(p);
        if out.len() == r {
            break;
        }
        for j in (i + 1)..pool.len() {
            if alive[j] {
                let (c, d_vc) = pool[j];
                if alpha * pair_dist(p, c) <= d_vc {
                    alive[j] = false;
                }
            }
        }
    }
    out
}

/// Builds a Vamana graph: random R-regular start, medoid entry point, two
/// passes (alpha 1.0 then `prune_alpha`) of greedy-search + prune over a
/// seeded permutation, reverse edges pruned on overflow, and a final
/// reachability repair for degenerate inputs.
pub fn build_graph(vectors: &FlatVectors, params: &BuildParams) -> Result<GraphIndex> {
    let n = vectors.count();
    if n < 2 {
        return Err(Error::usage(format!("graph build needs at least 2 vectors, got {n}")));
    }
    if params.max_degree < 2 {
        return Err(Error::usage("max_degree must be at least 2"));
    }
    let r = params.max_degree;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // random initial edges
    let mut adjacency: Vec<Vec<u32>> = (0..n as u32)
        .map(|v| {
            let mut set = HashSet::with_capacity(r);
            let want = r.min(n - 1);
            while set.len() < want {
                let u = rng.random_range(0..n as u32);
                if u != v {
                    set.insert(u);
                }
            }
            set.into_iter().collect()
        })
        .collect();

    let entry = medoid(vectors);
    let pair = |a: u32, b: u32| l2_sq(vectors.vector(a), vectors.vector(b));

    for pass_alpha in [1.0f32, params.prune_alpha] {
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(&mut rng);
        for batch in perm.chunks(BUILD_BATCH) {
            let outcomes: Vec<(u32, SearchOutcome)> = batch
                .par_iter()
                .map(|&v| {
                    let outcome = greedy_search_mem(
                        entry,
                        params.build_list_size,
                        |u| pair(u, v),
                        |u, buf| {
                            buf.clear();
                            buf.extend_from_slice(&adjacency[u as usize]);
                        },
                    );
                    (v, outcome)
                })
                .collect();
            for (v, outcome) in outcomes {
                let mut cands: Vec<(u32, f32)> = outcome
                    .visited
                    .into_iter()
                    .filter(|&(u, _)| u != v)
                    .collect();
                cands.extend(
                    adjacency[v as usize]
                        .iter()
                        .filter(|&&u| u != v)
                        .map(|&u| (u, pair(u, v))),
                );
                adjacency[v as usize] = robust_prune(&cands, r, pass_alpha, pair);
                for u in adjacency[v as usize].clone() {
                    let list = &mut adjacency[u as usize];
                    if !list.contains(&v) {
                        list.push(v);
                        if list.len() > r {
                            let cands: Vec<(u32, f32)> =
                                list.iter().map(|&w| (w, pair(w, u))).collect();
                            adjacency[u as usize] = robust_prune(&cands, r, pass_alpha, pair);
                        }
                    }
                }
            }
        }
    }

    ensure_reachable(&mut adjacency, entry, r, pair);
    Ok(GraphIndex { adjacency, entry_point: entry })
}

/// Attaches any vertex unreachable from the entry point to a reached vertex
/// with spare degree (degenerate inputs collapse most edges in pruning).
fn ensure_reachable<D>(adjacency: &mut [Vec<u32>], entry: u32, r: usize, mut pair: D)
where
    D: FnMut(u32, u32) -> f32,
{
    let n = adjacency.len();
    loop {
        let mut reached = vec![false; n];
        let mut queue = vec![entry];
        reached[entry as usize] = true;
        while let Some(v) = queue.pop() {
            for &u in &adjacency[v as usize] {
                if !reached[u as usize] {
                    reached[u as usize] = true;
                    queue.push(u);
                }
            }
        }
        let Some(lost) = (0..n).find(|&v| !reached[v]) else {
            return;
        };
        // host: a reached vertex with spare capacity, else the entry point
        // with its farthest edge evicted
        let host = (0..n)
            .filter(|&v| reached[v] && adjacency[v].len() < r)
            .min_by(|&a, &b| {
                pair(a as u32, lost as u32)
                    .total_cmp(&pair(b as u32, lost as u32))
                    .then(a.cmp(&b))
            });
        match host {
            Some(h) => adjacency[h].push(lost as u32),
            None => {
                let list = &mut adjacency[entry as usize];
                list.pop();
                list.push(lost as u32);
            }
        }
    }
}
