//! Fermionic embedding and guiding-state workbench.
//!
//! Builds impurity and model chemistry Hamiltonians, solves them exactly in a
//! fixed particle-number sector, constructs DMET-style and projection-based
//! embeddings, and measures how well cheap guiding states (Hartree-Fock
//! determinants, sum-of-Slater truncations, compressed MPS, excitation
//! projected states) overlap with true ground states.

pub mod analysis;
pub mod embedding;
pub mod error;
pub mod fock;
pub mod harness;
pub mod impurity;
pub mod io;
pub mod linalg;
pub mod meanfield;
pub mod model;
pub mod operator;
pub mod qpecost;
pub mod solver;
pub mod states;

pub use error::{Error, Result};
pub use fock::{apply_hamiltonian, apply_term, enumerate_sector, OccupationState, SectorBasis, WaveFunction};
pub use model::{ImpurityModel, MolecularIntegrals};
