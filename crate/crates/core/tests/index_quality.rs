//! Graph quality: in-memory greedy search recall against the brute-force
//! oracle on a clustered synthetic dataset.

use std::collections::HashSet;

use quiver::distance::{brute_force_knn, l2_sq, recall_at_k};
use quiver::index::vamana::{build_graph, greedy_search_mem, BuildParams, FlatVectors};
use quiver::synthetic;

#[test]
fn greedy_recall_on_clustered_10k() {
    let n = 10_000;
    let dim = 128;
    let data = synthetic::clustered_f32(n, dim, 64, 11);
    let queries = synthetic::clustered_f32_queries(200, dim, 64, 11, 12);
    let vectors = FlatVectors::from_dataset(&data);
    let params = BuildParams { max_degree: 32, build_list_size: 64, prune_alpha: 1.2, seed: 7 };
    let graph = build_graph(&vectors, &params).unwrap();

    let mut total = 0.0;
    for q in 0..queries.count() as u32 {
        let query = queries.vector_f32(q);
        let out = greedy_search_mem(
            graph.entry_point,
            100,
            |u| l2_sq(vectors.vector(u), &query),
            |u, buf| {
                buf.clear();
                buf.extend_from_slice(&graph.adjacency[u as usize]);
            },
        );
        let got: Vec<u32> = out.top.iter().map(|c| c.0).collect();
        let truth: Vec<u32> = brute_force_knn(&data, &query, 10, &HashSet::new())
            .unwrap()
            .iter()
            .map(|c| c.0)
            .collect();
        total += recall_at_k(&got, &truth, 10).unwrap();
    }
    let recall = total / queries.count() as f64;
    println!("greedy recall@10 over {} queries: {recall:.4}", queries.count());
    assert!(recall >= 0.95, "recall@10 = {recall:.4} below 0.95");
}
