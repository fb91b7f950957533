//! Diffuse-interface bending energy with an area constraint and a
//! connectedness penalty, on uniform Cartesian grids in 2D and 3D.
//!
//! The crate is organized bottom-up:
//!
//! - [`scalar`]: double well, transition profile, plateau cutoff.
//! - [`grid`]: uniform cell-centered grids and scalar fields.
//! - [`ops`]: discrete differential operators with boundary closures.
//! - [`shapes`]: signed distances and smooth profile recovery.
//! - [`energy`]: the energy functionals and their exact discrete gradients.
//! - [`inner`]: minimization of the connectedness detector over indicators.
//! - [`outer`]: gradient flow of the total energy in the phase field.
//! - [`diagnostics`]: sharp-interface reference values and convergence sweeps.
//! - [`config`] / [`runner`]: JSON-driven runs mirroring the `solver` binary.

pub mod book;
pub mod config;
pub mod diagnostics;
pub mod energy;
pub mod inner;
pub mod io;
pub mod outer;
pub mod error;
pub mod grid;
pub mod ops;
pub mod quad;
pub mod runner;
pub mod scalar;
pub mod shapes;

pub use error::{Error, Result};
