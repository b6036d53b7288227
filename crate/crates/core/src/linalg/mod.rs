//! Complex sparse and dense linear-algebra kernels.

pub mod band_lu;
pub mod csr;
pub mod dense;
pub mod ilu0;
pub mod vector;

/// Complex scalar, stored as a pair of `f64`.
pub type Complex = num_complex::Complex64;

pub use band_lu::BandLuFactorization;
pub use csr::{ComplexCsrMatrix, DiagKind, Triangle};
pub use dense::{dense_lu_solve, thin_qr, DenseLu, DenseMatrix, RealMatrix};
pub use ilu0::Ilu0Factorization;
