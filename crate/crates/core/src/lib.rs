//! quiver: a disk-based approximate nearest neighbor search engine that keeps
//! vector data and graph-index metadata in separate, losslessly compressed
//! on-disk layouts.
//!
//! The crate is organized around the storage pipeline:
//!
//! - [`dataset`] / [`types`]: vector containers and fvecs/bvecs/ivecs file I/O
//! - [`codec`]: canonical Huffman, Elias-Fano, and XOR-delta transforms
//! - [`layout`]: segment/chunk/block vector files and the block-packed graph file
//! - [`index`]: Vamana graph construction and product quantization
//! - [`search`]: beam search with an LRU neighbor cache and adaptive re-ranking
//! - [`update`]: batched insert/delete merges and segment garbage collection
//! - [`engine`]: ties the pieces together behind one handle

pub mod characterize;
pub mod codec;
pub mod dataset;
pub mod distance;
pub mod engine;
pub mod error;
pub mod index;
pub mod layout;
pub mod search;
pub mod synthetic;
pub mod types;
pub mod update;

pub use engine::Engine;
pub use error::{Error, Result};
pub use types::{Dataset, ElementType, VectorRecord};
