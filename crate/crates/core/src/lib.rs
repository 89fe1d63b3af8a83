//! Bloch theory for periodic magnetic operators on lattices: fibers over the
//! character torus, band functions, Fermi surfaces, and the family of
//! spectral measures attached to them.

pub mod bands;
pub mod config;
pub mod driver;
pub mod error;
pub mod fermi_surface;
pub mod fiber;
pub mod lattice;
pub mod lift;
pub mod magnetic;
pub mod measures;
pub mod model;
pub mod output;
pub mod sturm;
pub mod verify;

pub use error::{Error, Result};
