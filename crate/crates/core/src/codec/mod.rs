//! Lossless codecs: byte entropy, XOR-delta transforms, per-segment canonical
//! Huffman coding, and Elias-Fano neighbor-list encoding.

pub mod bits;
pub mod delta;
pub mod elias_fano;
pub mod entropy;
pub mod huffman;

pub use delta::{build_base_vector, choose_chunk_transform, xor_transform, ChunkTransform};
pub use elias_fano::{ef_decode, ef_encode, ef_worst_case_bits, EncodedNeighborList};
pub use entropy::{build_frequency_table, byte_entropy, FrequencyTable};
pub use huffman::{huffman_build, huffman_decode, huffman_encode, HuffmanTable};
