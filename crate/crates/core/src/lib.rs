//! Compact random-access archives for datasets of visual tokens.
//!
//! Images are stored as square grids of codebook indices. Indices are
//! remapped by popularity, escape-encoded into bytes and compressed with a
//! single canonical Huffman table, one independently decodable record per
//! image. A token-space augmentation pipeline turns records back into
//! embedding tensors for training.

pub mod adapter;
pub mod archive;
pub mod augment;
pub mod bench;
pub mod codebook;
pub mod codec;
pub mod corpus;
pub mod error;
pub mod grid;
mod le;
pub mod pipeline;
pub mod rng;
pub mod tensor;

pub use archive::{open_archive, write_archive, write_archive_file, StorageReport, TokenArchive, WriteOptions};
pub use codebook::{rank_by_popularity, Codebook, PopularityPermutation, SynonymTable};
pub use error::{Error, ErrorCategory, Result};
pub use grid::TokenGrid;
pub use pipeline::{Batch, Mode, Pipeline, PipelineConfig};
