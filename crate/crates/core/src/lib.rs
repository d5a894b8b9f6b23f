//! Collaborative sequential news recommendation.
//!
//! Click logs are split into time windows, users are linked through a
//! co-reading network built from a truncated SVD of their reading histories,
//! and a GRU encoder with gated multi-head neighbor attention scores candidate
//! items. The crate also carries the offline evaluation harness, the baselines
//! it is compared against, and a synthetic click generator with known ground
//! truth.

pub mod ablation;
pub mod config;
pub mod coread;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evalbench;
pub mod model;
pub mod numerics;
pub mod synthgen;
pub mod training;

pub use error::{open_file, Error, ErrorClass, Result};
