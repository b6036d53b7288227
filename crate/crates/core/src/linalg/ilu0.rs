//! ILU(0): incomplete LU restricted to the sparsity pattern of A.
//!
//! L (unit diagonal, strictly lower part) and U (diagonal and above) share
//! one value array laid out on A's pattern. No pivoting is performed; a zero
//! pivot is reported as an error.

use crate::error::{Error, Result};

use super::csr::{ComplexCsrMatrix, DiagKind, Triangle};
use super::vector::ZERO;
use super::Complex;

#[derive(Debug, Clone)]
pub struct Ilu0Factorization {
    factors: ComplexCsrMatrix,
}

impl Ilu0Factorization {
    /// IKJ-ordered ILU(0).
    pub fn new(a: &ComplexCsrMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "ILU(0) needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let mut lu = a.clone();
        let offsets = lu.row_offsets().to_vec();
        let cols = lu.col_indices().to_vec();
        let diag: Vec<usize> = (0..n).map(|i| lu.diag_position(i)).collect();
        // column -> position in the current row, usize::MAX when absent
        let mut pos = vec![usize::MAX; n];
        let vals = lu.values_mut();
        for i in 0..n {
            for k in offsets[i]..offsets[i + 1] {
                pos[cols[k]] = k;
            }
            for kk in offsets[i]..diag[i] {
                let k = cols[kk];
                let pivot = vals[diag[k]];
                if pivot == ZERO {
                    return Err(Error::ZeroPivot { row: k });
                }
                let lik = vals[kk] / pivot;
                vals[kk] = lik;
                for kj in diag[k] + 1..offsets[k + 1] {
                    let j = cols[kj];
                    let p = pos[j];
                    if p != usize::MAX {
                        let ukj = vals[kj];
                        vals[p] -= lik * ukj;
                    }
                }
            }
            if vals[diag[i]] == ZERO {
                return Err(Error::ZeroPivot { row: i });
            }
            for k in offsets[i]..offsets[i + 1] {
                pos[cols[k]] = usize::MAX;
            }
        }
        Ok(Self { factors: lu })
    }

    /// Combined L\U values on A's pattern.
    pub fn factors(&self) -> &ComplexCsrMatrix {
        &self.factors
    }

    /// `U⁻¹ L⁻¹ r`.
    pub fn apply(&self, r: &[Complex]) -> Result<Vec<Complex>> {
        let y = self
            .factors
            .triangular_solve(r, Triangle::Lower, DiagKind::Unit)?;
        self.factors
            .triangular_solve(&y, Triangle::Upper, DiagKind::Stored)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::band_lu::BandLuFactorization;

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    fn laplacian_2d(m: usize) -> ComplexCsrMatrix {
        let n = m * m;
        let mut trip = Vec::new();
        for y in 0..m {
            for x in 0..m {
                let i = y * m + x;
                trip.push((i, i, c(4.0)));
                if x > 0 {
                    trip.push((i, i - 1, c(-1.0)));
                }
                if x + 1 < m {
                    trip.push((i, i + 1, c(-1.0)));
                }
                if y > 0 {
                    trip.push((i, i - m, c(-1.0)));
                }
                if y + 1 < m {
                    trip.push((i, i + m, c(-1.0)));
                }
            }
        }
        ComplexCsrMatrix::from_triplets(n, n, trip).unwrap()
    }

    #[test]
    fn lower_triangular_is_exact() {
        let a = ComplexCsrMatrix::from_dense(
            3,
            3,
            &[c(2.0), ZERO, ZERO, c(1.0), c(4.0), ZERO, ZERO, Complex::new(1.0, 1.0), c(5.0)],
        )
        .unwrap();
        let f = Ilu0Factorization::new(&a).unwrap();
        let x = vec![c(1.0), c(-2.0), Complex::new(0.5, 1.0)];
        let b = a.matvec(&x).unwrap();
        let y = f.apply(&b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).norm() < 1e-14);
        }
        // U keeps A's diagonal
        assert_eq!(f.factors().get(1, 1), c(4.0));
        assert_eq!(f.factors().get(1, 0), c(0.5));
    }

    #[test]
    fn tridiagonal_matches_band_lu() {
        let n = 12;
        let trip = (0..n).flat_map(|i| {
            let mut v = vec![(i, i, Complex::new(3.0, 0.5))];
            if i > 0 {
                v.push((i, i - 1, c(-1.0)));
            }
            if i + 1 < n {
                v.push((i, i + 1, Complex::new(-1.0, 0.2)));
            }
            v
        });
        let a = ComplexCsrMatrix::from_triplets(n, n, trip).unwrap();
        let r: Vec<Complex> = (0..n).map(|i| Complex::new(i as f64, 1.0 - i as f64)).collect();
        let x1 = Ilu0Factorization::new(&a).unwrap().apply(&r).unwrap();
        let x2 = BandLuFactorization::new(&a).unwrap().solve(&r).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).norm() <= 1e-12 * q.norm().max(1.0));
        }
    }

    #[test]
    fn laplacian_product_matches_on_pattern() {
        let m = 3;
        let a = laplacian_2d(m);
        let f = Ilu0Factorization::new(&a).unwrap();
        let lu = f.factors();
        let n = a.nrows();
        // recompute (L U)[i, j] for every (i, j) on A's pattern
        for i in 0..n {
            for (j, aij) in a.row(i) {
                let mut s = ZERO;
                for k in 0..=i.min(j) {
                    let l = if k == i { c(1.0) } else { lu.get(i, k) };
                    let u = lu.get(k, j);
                    if k <= j && k <= i {
                        s += l * u;
                    }
                }
                assert!((s - aij).norm() < 1e-12, "mismatch at ({i}, {j})");
            }
        }
    }

    #[test]
    fn zero_pivot_is_error() {
        let a = ComplexCsrMatrix::from_dense(2, 2, &[ZERO, c(1.0), c(1.0), c(1.0)]).unwrap();
        assert!(matches!(
            Ilu0Factorization::new(&a),
            Err(Error::ZeroPivot { row: 0 })
        ));
    }
}
