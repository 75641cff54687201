//! Hierarchical random compression for fast kernel summation in 2-D.
//!
//! Computes `E_i = sum_j K(r_i, r_j) q_j x_j` for target/source point sets by
//! partitioning both into quadtrees and replacing every admissible (far-field)
//! interaction block with a low-rank factorization built from uniformly
//! sampled rows and columns. Near-field blocks are evaluated directly.
//!
//! Module map:
//! - [`kernels`]: interaction kernels and their smoothness metadata.
//! - [`geometry`]: points, quadtrees, admissibility and random-path sampling.
//! - [`compress`]: randomized compression of a single far-field block.
//! - [`hmatrix`]: the hierarchical traversal, the direct oracle and the block census.
//! - [`analysis`]: sampling-probability theory and error statistics.
//! - [`bench`]: experiment configuration, runner and structured reports.

pub mod analysis;
pub mod bench;
pub mod compress;
mod error;
pub mod geometry;
pub mod hmatrix;
pub mod kernels;
pub mod linalg;
pub mod rng;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use num_complex::Complex64;
