//! Mean-field theory of the Bose-Hubbard model at large coordination number.
//!
//! The crate contains
//!
//! - [`lattice`]: regular graphs (periodic tori, ball graphs) and the full
//!   Bose-Hubbard Hamiltonian on them, for exact diagonalization of small
//!   lattices;
//! - [`meanfield`]: the Gutzwiller energy functional, its minimization and the
//!   Mott-insulator / superfluid phase diagram;
//! - [`coreshell`]: the one-core/`z`-shell Hamiltonian in the
//!   permutation-symmetric sector, whose ground-state energy bounds the
//!   lattice energy from below, together with the moment-operator inequalities;
//! - [`definetti`]: exact finite-dimensional de Finetti constructions for
//!   states on `H_0 ⊗ (C^{m+1})^{⊗N}`;
//! - [`cli`]: the `bhmft` command-line front end.
//!
//! All randomness is seeded ([`numerics::RngSeed`]), so every computation is
//! reproducible bit for bit.

pub mod cli;
pub mod coreshell;
pub mod definetti;
pub mod error;
pub mod lattice;
pub mod meanfield;
pub mod numerics;

pub use error::{Error, Result};
