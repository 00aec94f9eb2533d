//! Graph spectral sparsification by approximate trace reduction.
//!
//! A sparsifier `P` of a weighted graph `G` starts from a maximum-weight
//! spanning tree and recovers the off-tree edges whose addition most reduces
//! `Trace(L_P⁻¹ L_G)`. Scores come from BFS voltages on the tree in the first
//! round and from a sparse approximate inverse of the sparsifier's Cholesky
//! factor afterwards. The resulting `L_P` serves as a PCG preconditioner for
//! `L_G`, which the [`sim`] drivers use for transient analysis and spectral
//! partitioning.

// `!(x > 0.0)` is used on purpose so that NaN is rejected as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx_inverse;
pub mod cholesky;
pub mod cli;
pub mod dense;
pub mod error;
pub mod generate;
pub mod graph;
pub mod mtx;
pub(crate) mod scratch;
pub mod sim;
pub mod solver;
pub mod sparsify;
pub mod trace;
pub mod tree;

pub use error::{Error, Result};
pub use graph::{Edge, GammaPolicy, Graph, RegularizedLaplacian, Subgraph};
pub use sparsify::{sparsify, Sparsifier, SparsifyConfig};
