//! Linear algebra building blocks: sparse and dense Hermitian matrices,
//! Lanczos ground-state solver, seeded random sampling.

pub mod dense;
pub mod lanczos;
pub mod random;
pub mod sparse;

pub use dense::{dense_eigenvalues, dense_eigs, trace_norm, DenseHermitian, Eigen};
pub use lanczos::{lanczos_ground, lanczos_ground_default, GroundPair};
pub use random::{haar_sphere_sample, RngSeed};
pub use sparse::{SparseHermitian, SparseMatrix};
