//! Two-level preconditioner on a coarse space spanned by basis columns,
//! typically the trunk outputs at the grid nodes.
//!
//! With `Q` the orthonormalized selected columns, the coarse correction is
//! `C r = Q A_c⁻¹ Qᵀ r` where `A_c = Qᵀ A Q`.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deeponet::DeepOnetWeights;
use crate::error::{Error, Result};
use crate::linalg::vector::{sub, ZERO};
use crate::linalg::{
    thin_qr, Complex, ComplexCsrMatrix, DenseLu, DenseMatrix, RealMatrix,
};
use crate::linalg::dense::DEFAULT_COARSE_DIM_CAP;
use crate::mesh::StructuredGrid;
use crate::solvers::Preconditioner;

/// Which basis columns span the coarse space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// The first `s` columns.
    Natural,
    /// `s` distinct columns drawn with the given seed, kept in ascending order.
    Random { seed: u64 },
    Custom(Vec<usize>),
}

impl Selection {
    pub fn indices(&self, s: usize, p: usize) -> Result<Vec<usize>> {
        if s == 0 || s > p {
            return Err(Error::InvalidArgument(format!(
                "coarse dimension must lie in 1..={p}, got {s}"
            )));
        }
        let idx = match self {
            Selection::Natural => (0..s).collect(),
            Selection::Random { seed } => {
                let mut v = sample(&mut ChaCha8Rng::seed_from_u64(*seed), p, s).into_vec();
                v.sort_unstable();
                v
            }
            Selection::Custom(v) => {
                if v.len() != s {
                    return Err(Error::InvalidArgument(format!(
                        "custom selection has {} columns, expected {s}",
                        v.len()
                    )));
                }
                let mut seen = vec![false; p];
                for &j in v {
                    if j >= p || std::mem::replace(&mut seen[j], true) {
                        return Err(Error::InvalidArgument(format!(
                            "custom selection column {j} is out of range or repeated"
                        )));
                    }
                }
                v.clone()
            }
        };
        Ok(idx)
    }
}

/// Orthonormal coarse basis with its factored Galerkin operator.
#[derive(Debug, Clone)]
pub struct TbCoarseSpace {
    q: RealMatrix,
    a_c: DenseMatrix,
    lu: DenseLu,
    selection: Vec<usize>,
}

impl TbCoarseSpace {
    /// Coarse space from the columns of `basis` (n×p) chosen by `selection`.
    pub fn from_basis(
        a: &ComplexCsrMatrix,
        basis: &RealMatrix,
        s: usize,
        selection: &Selection,
    ) -> Result<Self> {
        if basis.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} rows for a system of size {}",
                basis.nrows(),
                a.nrows()
            )));
        }
        let cols = selection.indices(s, basis.ncols())?;
        let p = basis.select_columns(&cols)?;
        let (q, _) = thin_qr(&p).map_err(|e| match e {
            Error::RankDeficient { col } => Error::RankDeficient { col: cols[col] },
            other => other,
        })?;
        let a_c = galerkin(a, &q)?;
        let lu = DenseLu::new(&a_c, DEFAULT_COARSE_DIM_CAP.max(s))?;
        Ok(Self {
            q,
            a_c,
            lu,
            selection: cols,
        })
    }

    pub fn q(&self) -> &RealMatrix {
        &self.q
    }

    pub fn coarse_matrix(&self) -> &DenseMatrix {
        &self.a_c
    }

    pub fn selection(&self) -> &[usize] {
        &self.selection
    }

    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    /// `Q A_c⁻¹ Qᵀ r`.
    pub fn coarse_apply(&self, r: &[Complex]) -> Vec<Complex> {
        let (n, s) = (self.q.nrows(), self.q.ncols());
        let mut y = vec![ZERO; s];
        for i in 0..n {
            let row = self.q.row(i);
            for j in 0..s {
                y[j] += r[i] * row[j];
            }
        }
        let y = self.lu.solve(&y).expect("order fixed at construction");
        (0..n)
            .map(|i| self.q.row(i).iter().zip(&y).map(|(qv, yv)| yv * *qv).sum())
            .collect()
    }
}

/// `Qᵀ A Q` by applying `A` to each column of `Q`.
fn galerkin(a: &ComplexCsrMatrix, q: &RealMatrix) -> Result<DenseMatrix> {
    let s = q.ncols();
    let mut out = DenseMatrix::zeros(s, s);
    for j in 0..s {
        let col: Vec<Complex> = q.column(j).into_iter().map(|v| Complex::new(v, 0.0)).collect();
        let w = a.matvec(&col)?;
        for (n, wn) in w.iter().enumerate() {
            let row = q.row(n);
            for i in 0..s {
                out[(i, j)] += *wn * row[i];
            }
        }
    }
    Ok(out)
}

/// Coarse space spanned by trunk outputs at the grid nodes.
pub fn build_tb(
    weights: &DeepOnetWeights,
    a: &ComplexCsrMatrix,
    grid: &StructuredGrid,
    s: usize,
    selection: &Selection,
) -> Result<TbCoarseSpace> {
    if weights.meta().dim != grid.dim() {
        return Err(Error::Weights(format!(
            "{}D trunk on a {}D grid",
            weights.meta().dim,
            grid.dim()
        )));
    }
    let points: Vec<[f64; 3]> = (0..grid.num_nodes()).map(|i| grid.coords(i)).collect();
    TbCoarseSpace::from_basis(a, &weights.trunk_eval(&points), s, selection)
}

/// Tensor-product sine modes `Π sin(a_d π x_d)`, `a_d ≥ 1`, ordered by
/// `Σ a_d²` and then lexicographically, lowest frequencies first.
pub fn sine_basis(grid: &StructuredGrid, count: usize) -> Result<RealMatrix> {
    let dim = grid.dim();
    let max_freq = grid.nodes_per_axis() - 2;
    let mut modes: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..dim {
        modes = modes
            .into_iter()
            .flat_map(|m| {
                (1..=max_freq).map(move |a| {
                    let mut v = m.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    modes.sort_by_key(|m| (m.iter().map(|a| a * a).sum::<usize>(), m.clone()));
    if count > modes.len() {
        return Err(Error::InvalidArgument(format!(
            "grid supports only {} independent sine modes, asked for {count}",
            modes.len()
        )));
    }
    let n = grid.num_nodes();
    let mut data = vec![0.0; n * count];
    for i in 0..n {
        let x = grid.coords(i);
        for (j, mode) in modes[..count].iter().enumerate() {
            data[i * count + j] = mode
                .iter()
                .zip(&x)
                .map(|(&a, xd)| (a as f64 * std::f64::consts::PI * xd).sin())
                .product();
        }
    }
    RealMatrix::from_row_major(n, count, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// Pre-smoothing, coarse correction, post-smoothing.
    #[default]
    Multiplicative,
    /// Smoother and coarse correction summed.
    Additive,
}

/// Linear two-level preconditioner.
pub struct TwoLevel {
    coarse: Arc<TbCoarseSpace>,
    smoother: Option<Box<dyn Preconditioner>>,
    matrix: Arc<ComplexCsrMatrix>,
    mode: Composition,
}

impl TwoLevel {
    pub fn new(
        coarse: Arc<TbCoarseSpace>,
        smoother: Option<Box<dyn Preconditioner>>,
        matrix: Arc<ComplexCsrMatrix>,
        mode: Composition,
    ) -> Result<Self> {
        if let Some(m) = &smoother {
            if !m.is_linear() {
                return Err(Error::NonlinearPreconditioner(m.name()));
            }
        }
        if coarse.q.nrows() != matrix.nrows() {
            return Err(Error::DimensionMismatch("coarse space and matrix sizes differ".into()));
        }
        Ok(Self {
            coarse,
            smoother,
            matrix,
            mode,
        })
    }

    fn residual(&self, r: &[Complex], z: &[Complex]) -> Vec<Complex> {
        sub(r, &self.matrix.matvec(z).expect("sizes checked"))
    }
}

impl Preconditioner for TwoLevel {
    fn apply(&self, r: &[Complex]) -> Vec<Complex> {
        let Some(m1) = &self.smoother else {
            return self.coarse.coarse_apply(r);
        };
        match self.mode {
            Composition::Additive => {
                let mut z = m1.apply(r);
                for (zi, ci) in z.iter_mut().zip(self.coarse.coarse_apply(r)) {
                    *zi += ci;
                }
                z
            }
            Composition::Multiplicative => {
                let mut z = m1.apply(r);
                let c = self.coarse.coarse_apply(&self.residual(r, &z));
                for (zi, ci) in z.iter_mut().zip(c) {
                    *zi += ci;
                }
                let post = m1.apply(&self.residual(r, &z));
                for (zi, pi) in z.iter_mut().zip(post) {
                    *zi += pi;
                }
                z
            }
        }
    }

    fn name(&self) -> String {
        match &self.smoother {
            Some(m) => format!("tb{}+{}", self.coarse.dim(), m.name()),
            None => format!("tb{}", self.coarse.dim()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, ProblemSpec};
    use crate::linalg::BandLuFactorization;
    use crate::linalg::vector::norm2;
    use crate::mesh::ScattererMask;
    use crate::solvers::{gmres, Relaxation, RelaxationSpec, SolveControl};
    use rand::Rng;

    fn scattering(m: usize) -> Arc<ComplexCsrMatrix> {
        let grid = StructuredGrid::new(2, m).unwrap();
        let n = grid.num_nodes();
        let spec = ProblemSpec::scattering(grid, vec![6.0; n], vec![1.0; m], ScattererMask::empty(&grid));
        Arc::new(assemble(&spec).unwrap().matrix)
    }

    fn random_real(n: usize, p: usize, seed: u64) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealMatrix::from_row_major(n, p, (0..n * p).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap()
    }

    fn random_complex(n: usize, seed: u64) -> Vec<Complex> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    fn identity(n: usize) -> RealMatrix {
        let mut m = RealMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    #[test]
    fn selections() {
        assert_eq!(Selection::Natural.indices(32, 128).unwrap(), (0..32).collect::<Vec<_>>());
        let r = Selection::Random { seed: 3 }.indices(5, 20).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
        assert!(Selection::Custom(vec![1, 1]).indices(2, 4).is_err());
        assert!(Selection::Natural.indices(0, 4).is_err());
        assert!(Selection::Natural.indices(5, 4).is_err());
    }

    #[test]
    fn full_space_gives_exact_inverse() {
        let a = scattering(9);
        let n = a.nrows();
        let cs = TbCoarseSpace::from_basis(&a, &identity(n), n, &Selection::Natural).unwrap();
        let r = random_complex(n, 1);
        let exact = BandLuFactorization::new(&a).unwrap().solve(&r).unwrap();
        let z = cs.coarse_apply(&r);
        let d: Vec<Complex> = z.iter().zip(&exact).map(|(p, q)| p - q).collect();
        assert!(norm2(&d) <= 1e-10 * norm2(&exact));
    }

    #[test]
    fn orthogonality_and_galerkin_identity() {
        let a = scattering(9);
        let n = a.nrows();
        let cs = TbCoarseSpace::from_basis(&a, &random_real(n, 12, 2), 10, &Selection::Natural).unwrap();
        let q = cs.q();
        let qtq = q.transpose().matmul(q).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - target).abs() <= 1e-12);
            }
        }
        // independent dense triple product
        let ad = a.to_dense();
        for i in 0..10 {
            for j in 0..10 {
                let mut acc = Complex::new(0.0, 0.0);
                for r in 0..n {
                    for c in 0..n {
                        acc += ad[r * n + c] * (q[(r, i)] * q[(c, j)]);
                    }
                }
                assert!((acc - cs.coarse_matrix()[(i, j)]).norm() <= 1e-12 * (1.0 + acc.norm()));
            }
        }
    }

    #[test]
    fn coarse_apply_exact_on_range_and_zero_on_complement() {
        let a = scattering(9);
        let n = a.nrows();
        let cs = TbCoarseSpace::from_basis(&a, &random_real(n, 6, 3), 6, &Selection::Natural).unwrap();
        let y = random_complex(6, 4);
        let qy: Vec<Complex> = (0..n).map(|i| cs.q().row(i).iter().zip(&y).map(|(q, v)| v * *q).sum()).collect();
        let r = a.matvec(&qy).unwrap();
        let z = cs.coarse_apply(&r);
        let d: Vec<Complex> = z.iter().zip(&qy).map(|(p, q)| p - q).collect();
        assert!(norm2(&d) <= 1e-10 * norm2(&qy));

        let mut w = random_complex(n, 5);
        for j in 0..6 {
            let col = cs.q().column(j);
            let proj: Complex = col.iter().zip(&w).map(|(c, v)| v * *c).sum();
            for (wi, c) in w.iter_mut().zip(&col) {
                *wi -= proj * *c;
            }
        }
        assert!(norm2(&cs.coarse_apply(&w)) <= 1e-12 * norm2(&w));
    }

    #[test]
    fn rank_deficiency_names_column() {
        let a = scattering(5);
        let n = a.nrows();
        let mut b = random_real(n, 4, 6);
        for i in 0..n {
            b[(i, 3)] = 2.0 * b[(i, 1)];
        }
        match TbCoarseSpace::from_basis(&a, &b, 4, &Selection::Natural) {
            Err(Error::RankDeficient { col }) => assert_eq!(col, 3),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn two_level_is_linear_and_degenerates() {
        let a = scattering(9);
        let n = a.nrows();
        let cs = Arc::new(TbCoarseSpace::from_basis(&a, &random_real(n, 8, 7), 8, &Selection::Natural).unwrap());
        let plain = TwoLevel::new(cs.clone(), None, a.clone(), Composition::Additive).unwrap();
        let r = random_complex(n, 8);
        assert_eq!(plain.apply(&r), cs.coarse_apply(&r));

        let jac = Relaxation::new(RelaxationSpec::jacobi(), a.clone()).unwrap();
        for mode in [Composition::Multiplicative, Composition::Additive] {
            let m = TwoLevel::new(cs.clone(), Some(Box::new(jac.clone())), a.clone(), mode).unwrap();
            let r2 = random_complex(n, 9);
            let (al, be) = (Complex::new(0.7, -1.3), Complex::new(-2.0, 0.4));
            let comb: Vec<Complex> = r.iter().zip(&r2).map(|(x, y)| al * x + be * y).collect();
            let lhs = m.apply(&comb);
            let rhs: Vec<Complex> = m.apply(&r).iter().zip(m.apply(&r2)).map(|(x, y)| al * x + be * y).collect();
            let d: Vec<Complex> = lhs.iter().zip(&rhs).map(|(p, q)| p - q).collect();
            assert!(norm2(&d) <= 1e-12 * norm2(&rhs));
        }
    }

    #[test]
    fn gmres_full_space_one_iteration() {
        let a = scattering(9);
        let n = a.nrows();
        let cs = Arc::new(TbCoarseSpace::from_basis(&a, &identity(n), n, &Selection::Natural).unwrap());
        let m = TwoLevel::new(cs, None, a.clone(), Composition::Multiplicative).unwrap();
        let b = random_complex(n, 10);
        let out = gmres(&a, &b, &m, &SolveControl::default().with_tol(1e-10)).unwrap();
        assert_eq!(out.report.iterations, 1);
        assert!(out.report.final_residual <= 1e-10);
    }

    #[test]
    fn sine_basis_orders_by_frequency() {
        let g = StructuredGrid::new(2, 9).unwrap();
        let b = sine_basis(&g, 3).unwrap();
        // modes (1,1), (1,2), (2,1)
        let x = g.coords(g.linear_index(&[2, 4]));
        let pi = std::f64::consts::PI;
        let idx = g.linear_index(&[2, 4]);
        assert!((b[(idx, 0)] - (pi * x[0]).sin() * (pi * x[1]).sin()).abs() < 1e-15);
        assert!((b[(idx, 1)] - (pi * x[0]).sin() * (2.0 * pi * x[1]).sin()).abs() < 1e-15);
        assert!((b[(idx, 2)] - (2.0 * pi * x[0]).sin() * (pi * x[1]).sin()).abs() < 1e-15);
        assert!(sine_basis(&g, 50).is_err());
    }
}
