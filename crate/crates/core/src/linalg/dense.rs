//! Small dense kernels: complex LU for coarse solves, real Householder QR
//! for orthonormalizing trunk bases.

use crate::error::{Error, Result};

use super::vector::ZERO;
use super::Complex;

/// Default cap on the order of dense coarse systems.
pub const DEFAULT_COARSE_DIM_CAP: usize = 512;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<Complex>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![ZERO; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(1.0, 0.0);
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<Complex>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub fn matvec(&self, x: &[Complex]) -> Result<Vec<Complex>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch(format!(
                "dense matvec with {} columns and vector of length {}",
                self.ncols,
                x.len()
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.ncols.max(1))
            .take(self.nrows)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Partial-pivoted LU with the default order cap.
    pub fn lu(&self) -> Result<DenseLu> {
        DenseLu::new(self, DEFAULT_COARSE_DIM_CAP)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = Complex;

    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        &mut self.data[i * self.ncols + j]
    }
}

/// Dense LU with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<Complex>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn new(m: &DenseMatrix, order_cap: usize) -> Result<Self> {
        if m.nrows != m.ncols {
            return Err(Error::DimensionMismatch(format!(
                "dense LU needs a square matrix, got {}x{}",
                m.nrows, m.ncols
            )));
        }
        let n = m.nrows;
        if n > order_cap {
            return Err(Error::InvalidArgument(format!(
                "dense system of order {n} exceeds the cap of {order_cap}"
            )));
        }
        let mut lu = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, lu[i * n + k].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 {
                return Err(Error::SingularMatrix { col: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] -= l * u;
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[Complex]) -> Result<Vec<Complex>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for dense LU of order {n}",
                b.len()
            )));
        }
        let mut x: Vec<Complex> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        Ok(x)
    }
}

/// Solves `m x = b` by partial-pivoted LU.
pub fn dense_lu_solve(m: &DenseMatrix, b: &[Complex]) -> Result<Vec<Complex>> {
    m.lu()?.solve(b)
}

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    /// Keeps the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.ncols) {
            return Err(Error::InvalidArgument(format!(
                "column {bad} out of range for {} columns",
                self.ncols
            )));
        }
        let mut out = Self::zeros(self.nrows, cols.len());
        for i in 0..self.nrows {
            for (k, &j) in cols.iter().enumerate() {
                out[(i, k)] = self[(i, j)];
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch(format!(
                "product of {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.ncols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for RealMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// Householder thin QR: `m = Q R` with `Q` n×s orthonormal and `R` s×s upper
/// triangular with a nonnegative diagonal.
pub fn thin_qr(m: &RealMatrix) -> Result<(RealMatrix, RealMatrix)> {
    let (n, s) = (m.nrows, m.ncols);
    if n < s {
        return Err(Error::DimensionMismatch(format!(
            "thin QR needs rows >= columns, got {n}x{s}"
        )));
    }
    let scale = m.max_abs();
    // Work column-major: reflectors and R built in place.
    let mut a: Vec<Vec<f64>> = (0..s).map(|j| m.column(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut r = RealMatrix::zeros(s, s);
    for k in 0..s {
        let x = &a[k][k..];
        let alpha = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if alpha <= 1e-12 * scale || scale == 0.0 {
            return Err(Error::RankDeficient { col: k });
        }
        let mut v = x.to_vec();
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        for t in v.iter_mut() {
            *t /= vnorm;
        }
        for col in a.iter_mut().skip(k) {
            let seg = &mut col[k..];
            let d: f64 = seg.iter().zip(&v).map(|(p, q)| p * q).sum();
            for (p, q) in seg.iter_mut().zip(&v) {
                *p -= 2.0 * d * q;
            }
        }
        for j in k..s {
            r[(k, j)] = a[j][k];
        }
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{s-1} applied to the first s unit vectors.
    let mut q_cols: Vec<Vec<f64>> = (0..s)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    for (k, v) in reflectors.iter().enumerate().rev() {
        for col in q_cols.iter_mut() {
            let seg = &mut col[k..];
            let d: f64 = seg.iter().zip(v).map(|(p, q)| p * q).sum();
            for (p, q) in seg.iter_mut().zip(v) {
                *p -= 2.0 * d * q;
            }
        }
    }
    // Flip signs so diag(R) >= 0.
    for k in 0..s {
        if r[(k, k)] < 0.0 {
            for j in k..s {
                r[(k, j)] = -r[(k, j)];
            }
            for t in q_cols[k].iter_mut() {
                *t = -*t;
            }
        }
    }
    let mut q = RealMatrix::zeros(n, s);
    for (j, col) in q_cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            q[(i, j)] = *v;
        }
    }
    Ok((q, r))
}
