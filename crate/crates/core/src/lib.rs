//! Perfect state transfer and SWAP on engineered coupled-waveguide lattices.
//!
//! Coupling design, exact propagators, Gaussian phase-space and truncated
//! Fock-space engines, and fabrication geometry.

pub mod config;
pub mod error;
pub mod evolution;
pub mod fabrication;
pub mod fock;
pub mod gaussian;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod scan;

#[cfg(test)]
mod proptests;

pub use error::{PstError, Result};
pub use linalg::C64;
