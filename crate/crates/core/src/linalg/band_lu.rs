//! Partial-pivoted banded LU, the direct (reference) solver.
//!
//! Storage follows the LAPACK `gbtrf` layout: column-major band with `kl`
//! extra super-diagonals reserved for fill from row interchanges. Entry
//! `(i, j)` lives at `ab[j * ldab + kv + i - j]` with `kv = kl + ku`.

use crate::error::{Error, Result};

use super::csr::ComplexCsrMatrix;
use super::vector::ZERO;
use super::Complex;

/// Default memory cap for the packed factors: 4 GiB.
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

#[derive(Debug, Clone)]
pub struct BandLuFactorization {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex>,
    pivots: Vec<usize>,
}

impl BandLuFactorization {
    /// Factors `a` with the default memory cap.
    pub fn new(a: &ComplexCsrMatrix) -> Result<Self> {
        Self::with_memory_cap(a, DEFAULT_MEMORY_CAP)
    }

    pub fn with_memory_cap(a: &ComplexCsrMatrix, cap_bytes: u64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "band LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidth();
        let ldab = 2 * kl + ku + 1;
        let required = (ldab as u64)
            .saturating_mul(n as u64)
            .saturating_mul(std::mem::size_of::<Complex>() as u64);
        if required > cap_bytes {
            return Err(Error::Capacity {
                required,
                cap: cap_bytes,
            });
        }
        let kv = kl + ku;
        let mut ab = vec![ZERO; ldab * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                ab[j * ldab + kv + i - j] = v;
            }
        }
        let mut f = Self {
            n,
            kl,
            ku,
            ldab,
            ab,
            pivots: vec![0; n],
        };
        f.factor()?;
        Ok(f)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = self.ab[self.idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularMatrix { col: k });
            }
            self.pivots[k] = p;
            let last_col = (k + kv).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.ab.swap(a, b);
                }
            }
            let inv = Complex::new(1.0, 0.0) / self.ab[self.idx(k, k)];
            for i in k + 1..=last_row {
                let t = self.idx(i, k);
                self.ab[t] *= inv;
            }
            for j in k + 1..=last_col {
                let akj = self.ab[self.idx(k, j)];
                if akj == ZERO {
                    continue;
                }
                let col = j * self.ldab + kv - j;
                let lcol = k * self.ldab + kv - k;
                for i in k + 1..=last_row {
                    let l = self.ab[lcol + i];
                    self.ab[col + i] -= l * akj;
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex]) -> Result<Vec<Complex>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for band LU of order {}",
                b.len(),
                self.n
            )));
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [Complex]) {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk == ZERO {
                continue;
            }
            let last_row = (k + kl).min(n - 1);
            for i in k + 1..=last_row {
                x[i] -= self.ab[self.idx(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + kv).min(n - 1);
            let mut acc = x[k];
            for j in k + 1..=last_col {
                acc -= self.ab[self.idx(k, j)] * x[j];
            }
            x[k] = acc / self.ab[self.idx(k, k)];
        }
    }
}
