//! Numerics for lattice pseudo-differential calculus, wave-packet propagation,
//! velocity-support geometry and a one-particle toy detector on a periodic grid.

pub mod detector;
pub mod dispersion;
pub mod error;
pub mod exec;
pub mod grid;
pub mod harness;
pub mod profile;
pub mod regions;
pub mod weyl;

pub use error::{Error, Result};
pub use exec::Exec;
pub use num_complex::Complex64;
