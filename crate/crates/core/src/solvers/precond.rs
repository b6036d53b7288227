//! The preconditioner role `z = M(r)` and the simple members of the family.

use std::sync::Arc;

use crate::error::Result;
use crate::linalg::vector::zeros;
use crate::linalg::{BandLuFactorization, Complex, ComplexCsrMatrix, Ilu0Factorization};

/// Approximate inverse applied to a residual.
///
/// Implementations must map zero to zero. `is_linear` promises
/// `M(αa + βb) = αM(a) + βM(b)`; Krylov methods refuse nonlinear operators
/// unless run in flexible mode.
pub trait Preconditioner: Send + Sync {
    fn apply(&self, r: &[Complex]) -> Vec<Complex>;

    fn is_linear(&self) -> bool {
        true
    }

    fn name(&self) -> String;
}

impl<P: Preconditioner + ?Sized> Preconditioner for Arc<P> {
    fn apply(&self, r: &[Complex]) -> Vec<Complex> {
        (**self).apply(r)
    }

    fn is_linear(&self) -> bool {
        (**self).is_linear()
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

impl<P: Preconditioner + ?Sized> Preconditioner for Box<P> {
    fn apply(&self, r: &[Complex]) -> Vec<Complex> {
        (**self).apply(r)
    }

    fn is_linear(&self) -> bool {
        (**self).is_linear()
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

/// `M = I`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[Complex]) -> Vec<Complex> {
        r.to_vec()
    }

    fn name(&self) -> String {
        "none".into()
    }
}

/// `M = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroOperator;

impl Preconditioner for ZeroOperator {
    fn apply(&self, r: &[Complex]) -> Vec<Complex> {
        zeros(r.len())
    }

    fn name(&self) -> String {
        "zero".into()
    }
}

/// Exact inverse through a band LU factorization.
#[derive(Debug, Clone)]
pub struct ExactInverse {
    lu: BandLuFactorization,
}

impl ExactInverse {
    pub fn new(a: &ComplexCsrMatrix) -> Result<Self> {
        Ok(Self {
            lu: BandLuFactorization::new(a)?,
        })
    }
}

impl Preconditioner for ExactInverse {
    fn apply(&self, r: &[Complex]) -> Vec<Complex> {
        let mut x = r.to_vec();
        self.lu.solve_in_place(&mut x);
        x
    }

    fn name(&self) -> String {
        "lu".into()
    }
}

/// ILU(0) as a preconditioner.
#[derive(Debug, Clone)]
pub struct Ilu0Preconditioner {
    factors: Ilu0Factorization,
}

impl Ilu0Preconditioner {
    pub fn new(a: &ComplexCsrMatrix) -> Result<Self> {
        Ok(Self {
            factors: Ilu0Factorization::new(a)?,
        })
    }
}

impl Preconditioner for Ilu0Preconditioner {
    fn apply(&self, r: &[Complex]) -> Vec<Complex> {
        self.factors
            .apply(r)
            .expect("pivots were checked at factorization")
    }

    fn name(&self) -> String {
        "ilu0".into()
    }
}
