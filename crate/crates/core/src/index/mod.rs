//! Build-time index components: Vamana graph construction and product
//! quantization.

pub mod pq;
pub mod vamana;

pub use pq::{pq_asym_distance, pq_distance_table, pq_encode, train_pq, PQCodebook};
pub use vamana::{
    build_graph, greedy_search_mem, medoid, robust_prune, BuildParams, FlatVectors, GraphIndex,
};
