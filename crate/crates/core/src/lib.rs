//! Solvers for the complex Helmholtz scattering problem on structured grids.

pub mod error;
pub mod linalg;

pub mod assembly;
pub mod bench;
pub mod cli;
pub mod config;
pub mod container;
pub mod datagen;
pub mod deeponet;
pub mod grf;
pub mod mesh;
pub mod multigrid;
pub mod solvers;
pub mod tb;

pub use error::{Error, Result};
pub use linalg::Complex;
