//! Botnet traffic classification toolkit.
//!
//! The pipeline: read packet captures, assemble bidirectional TCP flows,
//! compute eleven per-flow features, rank features by Gini Importance or
//! Information Gain, train decision-tree / random-forest / k-NN classifiers
//! from scratch, and score feature subsets by F1 per millisecond of
//! classification time.

pub mod capture;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod ranking;

pub use error::Error;

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Tool version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
