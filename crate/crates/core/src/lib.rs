//! Exact finite-volume computations for Gibbs specifications on windows of
//! the integer lattice: kernels, entropies, diameters and specific free
//! energy estimates for potential, random-cluster, loop O(n) and Griffiths
//! models.

pub mod cluster;
pub mod error;
pub mod free_energy;
pub mod lattice;
pub mod measures;
pub mod specification;
pub mod verify;

pub use error::{Error, Result};
