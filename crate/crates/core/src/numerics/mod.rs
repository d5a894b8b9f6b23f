//! Dense and sparse matrix utilities, TF-IDF weighting, truncated SVD and
//! seeded randomness shared by the rest of the crate.

pub mod dense;
pub mod rng;
pub mod snapshot;
pub mod sparse;
pub mod svd;

pub use dense::{axpy, cosine, dot, norm2, sigmoid, DenseMatrix};
pub use rng::{derive_seed, SeededRng};
pub use snapshot::{read_matrix, write_matrix};
pub use sparse::{binary_weights, idf, tfidf, SparseBinaryMatrix, SparseMatrix};
pub use svd::{truncated_svd, truncated_svd_with, SvdFactors, SvdOptions};
