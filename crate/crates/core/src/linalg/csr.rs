//! Compressed sparse row storage for complex matrices.
//!
//! Square matrices always carry a structural diagonal: missing diagonal
//! entries are inserted as explicit zeros at construction so Jacobi, SOR and
//! ILU(0) can locate the pivot of every row in O(1).

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::vector::ZERO;
use super::Complex;

/// Which triangle of the matrix a triangular solve uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Triangle {
    Lower,
    Upper,
}

/// Whether the triangular solve divides by the stored diagonal or assumes ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagKind {
    Stored,
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<Complex>,
    /// Position of the diagonal entry per row (square matrices only).
    diag_pos: Vec<usize>,
}

impl ComplexCsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating the structure.
    ///
    /// Column indices must be strictly increasing within a row. For square
    /// matrices any missing diagonal entry is inserted as an explicit zero.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<Complex>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::InvalidStructure(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidStructure("row_offsets[0] must be 0".into()));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidStructure("row_offsets must be non-decreasing".into()));
        }
        let nnz = row_offsets[nrows];
        if col_indices.len() != nnz || values.len() != nnz {
            return Err(Error::InvalidStructure(format!(
                "nnz = {nnz} but col_indices has {} and values has {} entries",
                col_indices.len(),
                values.len()
            )));
        }
        for i in 0..nrows {
            let cols = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidStructure(format!(
                    "column indices of row {i} are not strictly increasing"
                )));
            }
            if let Some(&c) = cols.last() {
                if c >= ncols {
                    return Err(Error::InvalidStructure(format!(
                        "column index {c} out of range in row {i}"
                    )));
                }
            }
            for v in &values[row_offsets[i]..row_offsets[i + 1]] {
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::InvalidStructure(format!("non-finite value in row {i}")));
                }
            }
        }
        let mut m = Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
            diag_pos: Vec::new(),
        };
        if nrows == ncols {
            m.ensure_diagonal();
        }
        Ok(m)
    }

    /// Builds a matrix from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, Complex)>,
    {
        let mut rows: Vec<BTreeMap<usize, Complex>> = vec![BTreeMap::new(); nrows];
        for (i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            *rows[i].entry(j).or_insert(ZERO) += v;
        }
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for row in rows {
            for (j, v) in row {
                col_indices.push(j);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        Self::from_raw(nrows, ncols, row_offsets, col_indices, values)
    }

    /// Builds a matrix from a row-major dense array, keeping nonzero entries.
    pub fn from_dense(nrows: usize, ncols: usize, dense: &[Complex]) -> Result<Self> {
        if dense.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!(
                "dense array of length {} for a {nrows}x{ncols} matrix",
                dense.len()
            )));
        }
        Self::from_triplets(
            nrows,
            ncols,
            (0..nrows)
                .flat_map(|i| (0..ncols).map(move |j| (i, j)))
                .filter_map(|(i, j)| {
                    let v = dense[i * ncols + j];
                    (v != ZERO).then_some((i, j, v))
                }),
        )
    }

    pub fn identity(n: usize) -> Self {
        Self::from_raw(
            n,
            n,
            (0..=n).collect(),
            (0..n).collect(),
            vec![Complex::new(1.0, 0.0); n],
        )
        .expect("identity is well formed")
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_raw(nrows, ncols, vec![0; nrows + 1], Vec::new(), Vec::new())
            .expect("empty matrix is well formed")
    }

    fn ensure_diagonal(&mut self) {
        let n = self.nrows;
        let missing = (0..n).any(|i| self.find(i, i).is_none());
        if missing {
            let mut row_offsets = Vec::with_capacity(n + 1);
            let mut col_indices = Vec::with_capacity(self.nnz() + n);
            let mut values = Vec::with_capacity(self.nnz() + n);
            row_offsets.push(0);
            for i in 0..n {
                let mut inserted = false;
                for k in self.row_range(i) {
                    let j = self.col_indices[k];
                    if !inserted && j > i {
                        col_indices.push(i);
                        values.push(ZERO);
                        inserted = true;
                    }
                    if j == i {
                        inserted = true;
                    }
                    col_indices.push(j);
                    values.push(self.values[k]);
                }
                if !inserted {
                    col_indices.push(i);
                    values.push(ZERO);
                }
                row_offsets.push(col_indices.len());
            }
            self.row_offsets = row_offsets;
            self.col_indices = col_indices;
            self.values = values;
        }
        self.diag_pos = (0..n)
            .map(|i| self.find(i, i).expect("diagonal inserted above"))
            .collect();
    }

    fn find(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row_range(i);
        let start = range.start;
        self.col_indices[range].binary_search(&j).ok().map(|k| start + k)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_offsets[self.nrows]
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex] {
        &mut self.values
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    /// Iterates the stored `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex)> + '_ {
        self.row_range(i)
            .map(move |k| (self.col_indices[k], self.values[k]))
    }

    /// Stored value at `(i, j)`, zero when structurally absent.
    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.find(i, j).map_or(ZERO, |k| self.values[k])
    }

    /// Index into `values` of the diagonal entry of row `i` (square only).
    #[inline]
    pub fn diag_position(&self, i: usize) -> usize {
        self.diag_pos[i]
    }

    pub fn diagonal(&self) -> Vec<Complex> {
        self.diag_pos.iter().map(|&k| self.values[k]).collect()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex]) -> Result<Vec<Complex>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch(format!(
                "matvec with {} columns and vector of length {}",
                self.ncols,
                x.len()
            )));
        }
        let mut y = vec![ZERO; self.nrows];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without allocation; lengths are the caller's responsibility.
    pub fn matvec_into(&self, x: &[Complex], y: &mut [Complex]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_range(i) {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
    }

    /// `r = b - A x`.
    pub fn residual(&self, b: &[Complex], x: &[Complex]) -> Result<Vec<Complex>> {
        if b.len() != self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for {} rows",
                b.len(),
                self.nrows
            )));
        }
        let mut r = self.matvec(x)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        Ok(r)
    }

    /// Solves `triangle(A) x = b` by substitution.
    pub fn triangular_solve(
        &self,
        b: &[Complex],
        part: Triangle,
        diag: DiagKind,
    ) -> Result<Vec<Complex>> {
        if !self.is_square() || b.len() != self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "triangular solve on {}x{} with rhs of length {}",
                self.nrows,
                self.ncols,
                b.len()
            )));
        }
        let mut x = b.to_vec();
        let n = self.nrows;
        let pivot = |i: usize| -> Result<Complex> {
            match diag {
                DiagKind::Unit => Ok(Complex::new(1.0, 0.0)),
                DiagKind::Stored => {
                    let d = self.values[self.diag_pos[i]];
                    if d == ZERO {
                        Err(Error::SingularTriangle { row: i })
                    } else {
                        Ok(d)
                    }
                }
            }
        };
        match part {
            Triangle::Lower => {
                for i in 0..n {
                    let mut acc = x[i];
                    for k in self.row_offsets[i]..self.diag_pos[i] {
                        acc -= self.values[k] * x[self.col_indices[k]];
                    }
                    x[i] = acc / pivot(i)?;
                }
            }
            Triangle::Upper => {
                for i in (0..n).rev() {
                    let mut acc = x[i];
                    for k in self.diag_pos[i] + 1..self.row_offsets[i + 1] {
                        acc -= self.values[k] * x[self.col_indices[k]];
                    }
                    x[i] = acc / pivot(i)?;
                }
            }
        }
        Ok(x)
    }

    /// Lower and upper bandwidths `(kl, ku)` of the stored structure.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.nrows {
            for k in self.row_range(i) {
                let j = self.col_indices[k];
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![ZERO; self.nnz()];
        for i in 0..self.nrows {
            for k in self.row_range(i) {
                let j = self.col_indices[k];
                let dst = next[j];
                col_indices[dst] = i;
                values[dst] = self.values[k];
                next[j] += 1;
            }
        }
        Self::from_raw(self.ncols, self.nrows, counts, col_indices, values)
            .expect("transpose of a valid matrix is valid")
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch(format!(
                "product of {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        let mut acc = vec![ZERO; other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = ZERO;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_indices.push(j);
                values.push(acc[j]);
            }
            row_offsets.push(col_indices.len());
        }
        Self::from_raw(self.nrows, other.ncols, row_offsets, col_indices, values)
    }

    /// Multiplies every stored value by `alpha`.
    pub fn scaled(&self, alpha: Complex) -> Self {
        let mut m = self.clone();
        for v in m.values.iter_mut() {
            *v *= alpha;
        }
        m
    }

    /// Row-major dense copy, for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Complex> {
        let mut d = vec![ZERO; self.nrows * self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[i * self.ncols + j] = v;
            }
        }
        d
    }
}
