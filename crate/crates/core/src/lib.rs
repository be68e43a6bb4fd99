//! Floating projection topology optimization on fixed 2D meshes.
//!
//! Compliance minimization with a volume constraint, solved by an
//! optimality-criteria update combined with bound, filter and
//! volume-preserving Heaviside projection constraints. With the ersatz
//! material model the optimizer targets smooth designs with one layer of
//! intermediate boundary elements; with a penalization model (SIMP or the
//! Hashin-Shtrikman bound) it targets 0/1 designs.

mod banded;
pub mod config;
pub mod contour;
pub mod error;
pub mod fea;
pub mod io;
pub mod material;
pub mod optimizer;
pub mod runner;
pub mod smooth;

pub use error::{Error, Result};
