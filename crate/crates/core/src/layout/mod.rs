//! On-disk hierarchical storage: append-only mutable segments, sealed
//! compressed segments (chunks of 4,096-byte blocks), and the block-packed
//! graph file with its sparse index.

pub mod block;
pub mod graph_file;
pub mod segment;
pub mod store;

pub use block::{BlockBuilder, BlockView, BLOCK_SIZE};
pub use graph_file::{write_graph_index, GraphFileBuilder, GraphStore};
pub use segment::{
    chunk_capacity_for_budget, locate_vector, ChunkMetadata, SegmentManifest, SegmentState,
};
pub use store::{garbage_ratio, IoStats, StoreConfig, VectorStore, MAX_VECTOR_BYTES};
