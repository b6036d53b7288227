//! Stationary relaxation methods as preconditioners.
//!
//! With `A = D + L + U`:
//!
//! | kind   | one application                         |
//! |--------|-----------------------------------------|
//! | jacobi | `ω D⁻¹ r`                               |
//! | gs     | `(D + L)⁻¹ r`                           |
//! | sor    | `ω (D + ωL)⁻¹ r`                        |
//! | ssor   | `ω(2−ω) (D + ωU)⁻¹ D (D + ωL)⁻¹ r`      |
//!
//! Several sweeps are composed through the Richardson update
//! `e ← e + M(r − A e)` starting from `e = 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vector::{zeros, ZERO};
use crate::linalg::{Complex, ComplexCsrMatrix};

use super::precond::Preconditioner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationKind {
    Jacobi,
    GaussSeidel,
    Sor,
    Ssor,
}

impl RelaxationKind {
    pub fn label(self) -> &'static str {
        match self {
            RelaxationKind::Jacobi => "jacobi",
            RelaxationKind::GaussSeidel => "gs",
            RelaxationKind::Sor => "sor",
            RelaxationKind::Ssor => "ssor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSpec {
    pub kind: RelaxationKind,
    /// Relaxation weight in (0, 2); damping factor for Jacobi, ignored by GS.
    pub omega: f64,
    pub sweeps: usize,
}

impl RelaxationSpec {
    pub fn jacobi() -> Self {
        Self {
            kind: RelaxationKind::Jacobi,
            omega: 1.0,
            sweeps: 1,
        }
    }

    pub fn damped_jacobi(omega: f64) -> Self {
        Self {
            omega,
            ..Self::jacobi()
        }
    }

    pub fn gauss_seidel() -> Self {
        Self {
            kind: RelaxationKind::GaussSeidel,
            omega: 1.0,
            sweeps: 1,
        }
    }

    pub fn sor(omega: f64) -> Self {
        Self {
            kind: RelaxationKind::Sor,
            omega,
            sweeps: 1,
        }
    }

    pub fn ssor(omega: f64) -> Self {
        Self {
            kind: RelaxationKind::Ssor,
            omega,
            sweeps: 1,
        }
    }

    pub fn with_sweeps(mut self, sweeps: usize) -> Self {
        self.sweeps = sweeps;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "relaxation weight must lie in (0, 2), got {}",
                self.omega
            )));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidArgument("relaxation needs at least one sweep".into()));
        }
        Ok(())
    }
}

/// A relaxation method bound to a matrix.
#[derive(Debug, Clone)]
pub struct Relaxation {
    spec: RelaxationSpec,
    matrix: Arc<ComplexCsrMatrix>,
    diag: Vec<Complex>,
}

impl Relaxation {
    pub fn new(spec: RelaxationSpec, matrix: Arc<ComplexCsrMatrix>) -> Result<Self> {
        spec.validate()?;
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch("relaxation needs a square matrix".into()));
        }
        let diag = matrix.diagonal();
        if let Some(row) = diag.iter().position(|d| *d == ZERO) {
            return Err(Error::SingularTriangle { row });
        }
        Ok(Self { spec, matrix, diag })
    }

    pub fn spec(&self) -> &RelaxationSpec {
        &self.spec
    }

    /// One application of the splitting, without the sweep loop.
    pub fn apply_once(&self, r: &[Complex]) -> Vec<Complex> {
        let w = self.spec.omega;
        match self.spec.kind {
            RelaxationKind::Jacobi => r
                .iter()
                .zip(&self.diag)
                .map(|(ri, di)| ri * w / di)
                .collect(),
            RelaxationKind::GaussSeidel => self.forward(r, 1.0),
            RelaxationKind::Sor => {
                let mut y = self.forward(r, w);
                for v in y.iter_mut() {
                    *v *= w;
                }
                y
            }
            RelaxationKind::Ssor => {
                let y = self.forward(r, w);
                let dy: Vec<Complex> = y.iter().zip(&self.diag).map(|(a, d)| a * d).collect();
                let mut z = self.backward(&dy, w);
                let s = w * (2.0 - w);
                for v in z.iter_mut() {
                    *v *= s;
                }
                z
            }
        }
    }

    /// Solves `(D + ωL) y = r`.
    fn forward(&self, r: &[Complex], w: f64) -> Vec<Complex> {
        let a = &*self.matrix;
        let mut y = zeros(r.len());
        let cols = a.col_indices();
        let vals = a.values();
        for i in 0..r.len() {
            let mut acc = ZERO;
            for k in a.row_offsets()[i]..a.diag_position(i) {
                acc += vals[k] * y[cols[k]];
            }
            y[i] = (r[i] - acc * w) / self.diag[i];
        }
        y
    }

    /// Solves `(D + ωU) y = r`.
    fn backward(&self, r: &[Complex], w: f64) -> Vec<Complex> {
        let a = &*self.matrix;
        let mut y = zeros(r.len());
        let cols = a.col_indices();
        let vals = a.values();
        for i in (0..r.len()).rev() {
            let mut acc = ZERO;
            for k in a.diag_position(i) + 1..a.row_offsets()[i + 1] {
                acc += vals[k] * y[cols[k]];
            }
            y[i] = (r[i] - acc * w) / self.diag[i];
        }
        y
    }
}

impl Preconditioner for Relaxation {
    fn apply(&self, r: &[Complex]) -> Vec<Complex> {
        let mut e = self.apply_once(r);
        for _ in 1..self.spec.sweeps {
            let res = self.matrix.residual(r, &e).expect("dimensions fixed at construction");
            let d = self.apply_once(&res);
            for (ei, di) in e.iter_mut().zip(&d) {
                *ei += di;
            }
        }
        e
    }

    fn name(&self) -> String {
        match self.spec.kind {
            RelaxationKind::Sor | RelaxationKind::Ssor => {
                format!("{}({})", self.spec.kind.label(), self.spec.omega)
            }
            RelaxationKind::Jacobi if self.spec.omega != 1.0 => {
                format!("jacobi({})", self.spec.omega)
            }
            _ => self.spec.kind.label().to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn sample_matrix() -> Arc<ComplexCsrMatrix> {
        Arc::new(
            ComplexCsrMatrix::from_dense(
                3,
                3,
                &[
                    c(4.0, 1.0),
                    c(-1.0, 0.0),
                    c(0.5, 0.0),
                    c(-1.0, 0.0),
                    c(5.0, 0.0),
                    c(-1.0, 0.5),
                    c(0.0, 1.0),
                    c(-2.0, 0.0),
                    c(6.0, -1.0),
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn sor_with_unit_weight_is_gauss_seidel() {
        let a = sample_matrix();
        let r = vec![c(1.0, 2.0), c(-0.5, 0.0), c(3.0, -1.0)];
        let gs = Relaxation::new(RelaxationSpec::gauss_seidel(), a.clone()).unwrap();
        let sor = Relaxation::new(RelaxationSpec::sor(1.0), a).unwrap();
        assert_eq!(gs.apply(&r), sor.apply(&r));
    }

    #[test]
    fn ssor_matches_dense_formula() {
        let a = sample_matrix();
        let w = 1.3;
        let r = vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 1.0)];
        let z = Relaxation::new(RelaxationSpec::ssor(w), a.clone())
            .unwrap()
            .apply(&r);
        // (D + ωU) z = ω(2−ω) D (D + ωL)⁻¹ r, checked by substituting back
        let d = a.diagonal();
        let y = Relaxation::new(RelaxationSpec::sor(w), a.clone()).unwrap().apply(&r);
        // sor returns ω y_sor where (D+ωL) y_sor = r
        let y: Vec<Complex> = y.iter().map(|v| v / w).collect();
        for i in 0..3 {
            let mut lhs = d[i] * z[i];
            for j in i + 1..3 {
                lhs += a.get(i, j) * z[j] * w;
            }
            let rhs = d[i] * y[i] * (w * (2.0 - w));
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn sweeps_compose_through_richardson() {
        let a = sample_matrix();
        let r = vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let one = Relaxation::new(RelaxationSpec::jacobi(), a.clone()).unwrap();
        let two = Relaxation::new(RelaxationSpec::jacobi().with_sweeps(2), a.clone()).unwrap();
        let e1 = one.apply(&r);
        let res = a.residual(&r, &e1).unwrap();
        let e2: Vec<Complex> = e1.iter().zip(one.apply(&res)).map(|(p, q)| p + q).collect();
        assert_eq!(two.apply(&r), e2);
    }

    #[test]
    fn invalid_specs() {
        let a = sample_matrix();
        assert!(Relaxation::new(RelaxationSpec::sor(2.0), a.clone()).is_err());
        assert!(Relaxation::new(RelaxationSpec::jacobi().with_sweeps(0), a).is_err());
        let z = Arc::new(ComplexCsrMatrix::zeros(2, 2));
        assert!(matches!(
            Relaxation::new(RelaxationSpec::jacobi(), z),
            Err(Error::SingularTriangle { row: 0 })
        ));
    }

    #[test]
    fn zero_maps_to_zero() {
        let a = sample_matrix();
        for spec in [
            RelaxationSpec::jacobi(),
            RelaxationSpec::gauss_seidel(),
            RelaxationSpec::sor(1.5),
            RelaxationSpec::ssor(1.5).with_sweeps(3),
        ] {
            let m = Relaxation::new(spec, a.clone()).unwrap();
            assert!(m.apply(&[ZERO; 3]).iter().all(|v| *v == ZERO));
        }
    }
}
