//! Adaptive projected von Neumann basis (PvB) for the Schrodinger equation on periodic
//! Fourier grids.

pub mod dynamics;
pub mod error;
pub mod fourier_grid;
pub mod hamiltonian;
pub mod linalg;
pub mod models;
pub mod reduced_space;
pub mod solvers;
pub mod space;
pub mod validation;
pub mod vn_basis;

pub use error::{PvbError, Result};
pub use faer::c64;
