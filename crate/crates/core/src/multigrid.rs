//! Geometric multigrid on nested structured grids with Galerkin coarse
//! operators and damped-Jacobi smoothing.
//!
//! Level `i+1` has `m_{i+1} = (m_i + 1) / 2` nodes per axis. Prolongation is
//! multilinear, restriction is full weighting `R = Pᵀ / 2^d`, and the coarse
//! operators are `A_{i+1} = R A_i P`. The coarsest level is solved with a
//! band LU factorization.
//!
//! Rows with no off-diagonal entries (Dirichlet and scatterer nodes) are kept
//! out of the coarse space: prolongation never writes to them, and coarse
//! nodes that only see such rows get an identity row.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::vector::{add_assign, zeros, ZERO};
use crate::linalg::{BandLuFactorization, Complex, ComplexCsrMatrix};
use crate::mesh::{prolongation_matrix, StructuredGrid};
use crate::solvers::Preconditioner;

/// Coarsening stops once a level has at most this many nodes per axis.
pub const DEFAULT_COARSEST_M: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgOptions {
    /// Total number of levels; `None` coarsens down to [`DEFAULT_COARSEST_M`].
    pub levels: Option<usize>,
    pub omega: f64,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
}

impl Default for MgOptions {
    /// V(2,2) with ω = 2/3.
    fn default() -> Self {
        Self {
            levels: None,
            omega: 2.0 / 3.0,
            pre_sweeps: 2,
            post_sweeps: 2,
        }
    }
}

impl MgOptions {
    pub fn v(pre: usize, post: usize) -> Self {
        Self {
            pre_sweeps: pre,
            post_sweeps: post,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    grid: StructuredGrid,
    a: Arc<ComplexCsrMatrix>,
    diag_inv: Vec<Complex>,
}

/// Operators on every level plus the transfers between them.
#[derive(Debug, Clone)]
pub struct MgHierarchy {
    levels: Vec<Level>,
    /// `prolong[i]`: level `i+1` to level `i`.
    prolong: Vec<ComplexCsrMatrix>,
    restrict: Vec<ComplexCsrMatrix>,
    coarsest: BandLuFactorization,
    opts: MgOptions,
}

fn level_count(m: usize, requested: Option<usize>) -> Result<usize> {
    let mut sizes = vec![m];
    loop {
        let cur = *sizes.last().expect("non-empty");
        let done = match requested {
            Some(l) => sizes.len() >= l,
            None => cur <= DEFAULT_COARSEST_M,
        };
        if done {
            break;
        }
        if cur % 2 == 0 || cur < 5 {
            return Err(Error::InvalidArgument(format!(
                "grid with m = {m} cannot be coarsened to {} levels; m must be 2^q + 1",
                requested.map_or("the default".to_string(), |l| l.to_string())
            )));
        }
        sizes.push(cur.div_ceil(2));
    }
    Ok(sizes.len())
}

impl MgHierarchy {
    pub fn new(a: &ComplexCsrMatrix, grid: &StructuredGrid, opts: MgOptions) -> Result<Self> {
        if a.nrows() != grid.num_nodes() || !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "matrix of order {} on a grid with {} nodes",
                a.nrows(),
                grid.num_nodes()
            )));
        }
        if !(opts.omega > 0.0 && opts.omega <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Jacobi damping must lie in (0, 1], got {}",
                opts.omega
            )));
        }
        if opts.levels == Some(0) {
            return Err(Error::InvalidArgument("at least one level is required".into()));
        }
        let count = level_count(grid.nodes_per_axis(), opts.levels)?;
        let scale = Complex::new(0.5f64.powi(grid.dim() as i32), 0.0);
        let mut levels = vec![Level::new(*grid, Arc::new(a.clone()))?];
        let mut prolong = Vec::new();
        let mut restrict = Vec::new();
        for _ in 1..count {
            let fine = levels.last().expect("non-empty");
            let coarse_grid = StructuredGrid::new(grid.dim(), fine.grid.nodes_per_axis().div_ceil(2))?;
            let p = masked_prolongation(&prolongation_matrix(&coarse_grid, &fine.grid)?, &fine.a)?;
            let r = p.transpose().scaled(scale);
            let ac = with_unit_empty_rows(&r.matmul(&fine.a.matmul(&p)?)?)?;
            levels.push(Level::new(coarse_grid, Arc::new(ac))?);
            prolong.push(p);
            restrict.push(r);
        }
        let coarsest = BandLuFactorization::new(&levels.last().expect("non-empty").a)?;
        Ok(Self {
            levels,
            prolong,
            restrict,
            coarsest,
            opts,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn options(&self) -> &MgOptions {
        &self.opts
    }

    pub fn operator(&self, level: usize) -> &ComplexCsrMatrix {
        &self.levels[level].a
    }

    pub fn grid(&self, level: usize) -> &StructuredGrid {
        &self.levels[level].grid
    }

    pub fn prolongation(&self, level: usize) -> &ComplexCsrMatrix {
        &self.prolong[level]
    }

    pub fn restriction(&self, level: usize) -> &ComplexCsrMatrix {
        &self.restrict[level]
    }

    fn smooth(&self, level: usize, r: &[Complex], e: &mut [Complex], sweeps: usize) {
        let lv = &self.levels[level];
        let w = self.opts.omega;
        for _ in 0..sweeps {
            let res = lv.a.residual(r, e).expect("sizes fixed");
            for ((ei, ri), di) in e.iter_mut().zip(&res).zip(&lv.diag_inv) {
                *ei += ri * di * w;
            }
        }
    }

    fn cycle(&self, level: usize, r: &[Complex], extra: Option<&dyn Preconditioner>) -> Vec<Complex> {
        if level + 1 == self.levels.len() {
            let mut x = r.to_vec();
            self.coarsest.solve_in_place(&mut x);
            return x;
        }
        let mut e = zeros(r.len());
        self.smooth(level, r, &mut e, self.opts.pre_sweeps);
        if let Some(m) = extra {
            let res = self.levels[level].a.residual(r, &e).expect("sizes fixed");
            add_assign(&mut e, &m.apply(&res));
        }
        let res = self.levels[level].a.residual(r, &e).expect("sizes fixed");
        let rc = self.restrict[level].matvec(&res).expect("sizes fixed");
        let ec = self.cycle(level + 1, &rc, None);
        add_assign(&mut e, &self.prolong[level].matvec(&ec).expect("sizes fixed"));
        self.smooth(level, r, &mut e, self.opts.post_sweeps);
        e
    }

    /// One V-cycle applied to `r` from a zero initial guess.
    pub fn vcycle(&self, r: &[Complex]) -> Vec<Complex> {
        self.cycle(0, r, None)
    }
}

fn is_isolated_row(a: &ComplexCsrMatrix, i: usize) -> bool {
    a.row(i).all(|(j, v)| j == i || v == ZERO)
}

fn masked_prolongation(p: &ComplexCsrMatrix, a: &ComplexCsrMatrix) -> Result<ComplexCsrMatrix> {
    let keep: Vec<bool> = (0..a.nrows()).map(|i| !is_isolated_row(a, i)).collect();
    ComplexCsrMatrix::from_triplets(
        p.nrows(),
        p.ncols(),
        (0..p.nrows())
            .filter(|&i| keep[i])
            .flat_map(|i| p.row(i).map(move |(j, v)| (i, j, v))),
    )
}

fn with_unit_empty_rows(a: &ComplexCsrMatrix) -> Result<ComplexCsrMatrix> {
    let empty: Vec<usize> = (0..a.nrows()).filter(|&i| a.row(i).all(|(_, v)| v == ZERO)).collect();
    if empty.is_empty() {
        return Ok(a.clone());
    }
    ComplexCsrMatrix::from_triplets(
        a.nrows(),
        a.ncols(),
        (0..a.nrows())
            .flat_map(|i| a.row(i).map(move |(j, v)| (i, j, v)))
            .chain(empty.into_iter().map(|i| (i, i, Complex::new(1.0, 0.0)))),
    )
}

impl Level {
    fn new(grid: StructuredGrid, a: Arc<ComplexCsrMatrix>) -> Result<Self> {
        let diag = a.diagonal();
        if let Some(row) = diag.iter().position(|d| *d == ZERO) {
            return Err(Error::SingularTriangle { row });
        }
        Ok(Self {
            grid,
            diag_inv: diag.iter().map(|d| d.inv()).collect(),
            a,
        })
    }
}

/// V-cycle as a preconditioner, optionally with an extra finest-level
/// correction between pre-smoothing and the coarse-grid correction.
///
/// With V(2,2) and a neural-operator correction this is the 2-1-2 schedule.
/// The extra correction usually makes the cycle nonlinear, so Krylov methods
/// accept it only in flexible mode.
pub struct MgPreconditioner {
    hierarchy: Arc<MgHierarchy>,
    finest: Option<Box<dyn Preconditioner>>,
}

impl MgPreconditioner {
    pub fn new(hierarchy: Arc<MgHierarchy>) -> Self {
        Self {
            hierarchy,
            finest: None,
        }
    }

    /// 2-1-2 cycle: the hierarchy should be V(2,2).
    pub fn with_finest_correction(hierarchy: Arc<MgHierarchy>, correction: Box<dyn Preconditioner>) -> Self {
        Self {
            hierarchy,
            finest: Some(correction),
        }
    }

    pub fn hierarchy(&self) -> &MgHierarchy {
        &self.hierarchy
    }
}

impl Preconditioner for MgPreconditioner {
    fn apply(&self, r: &[Complex]) -> Vec<Complex> {
        self.hierarchy.cycle(0, r, self.finest.as_deref())
    }

    fn is_linear(&self) -> bool {
        self.finest.as_ref().is_none_or(|m| m.is_linear())
    }

    fn name(&self) -> String {
        let o = self.hierarchy.options();
        match &self.finest {
            None => format!("mg-v({},{})", o.pre_sweeps, o.post_sweeps),
            Some(m) => format!("{}-mg-{}-1-{}", m.name(), o.pre_sweeps, o.post_sweeps),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, manufactured_problem};
    use crate::config::ProblemConfig;
    use crate::linalg::vector::norm2;
    use crate::solvers::{gmres, richardson, SolveControl, ZeroOperator};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson(dim: usize, m: usize) -> (ComplexCsrMatrix, StructuredGrid) {
        let grid = StructuredGrid::new(dim, m).unwrap();
        let (spec, _) = manufactured_problem(grid, 0.0);
        (assemble(&spec).unwrap().matrix, grid)
    }

    fn random_complex(n: usize, seed: u64) -> Vec<Complex> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    #[test]
    fn level_counts() {
        assert_eq!(level_count(33, None).unwrap(), 3);
        assert_eq!(level_count(65, None).unwrap(), 4);
        assert_eq!(level_count(9, None).unwrap(), 1);
        assert_eq!(level_count(5, Some(2)).unwrap(), 2);
        assert!(level_count(5, Some(3)).is_err());
        assert!(level_count(32, Some(2)).is_err());
    }

    #[test]
    fn galerkin_1d_matches_dense_triple_product() {
        let (a, grid) = poisson(1, 5);
        let h = MgHierarchy::new(&a, &grid, MgOptions { levels: Some(2), ..MgOptions::default() }).unwrap();
        // P for 3 -> 5 nodes with the two Dirichlet end rows removed
        let p = [[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 0.0]];
        let ad = a.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = Complex::new(0.0, 0.0);
                for r in 0..5 {
                    for c in 0..5 {
                        acc += ad[r * 5 + c] * (0.5 * p[r][i] * p[c][j]);
                    }
                }
                assert!((h.operator(1).get(i, j) - acc).norm() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn restriction_is_scaled_transpose() {
        let (a, grid) = poisson(2, 9);
        let h = MgHierarchy::new(&a, &grid, MgOptions { levels: Some(2), ..MgOptions::default() }).unwrap();
        let (p, r) = (h.prolongation(0), h.restriction(0));
        for i in 0..r.nrows() {
            for j in 0..r.ncols() {
                assert_eq!(r.get(i, j), p.get(j, i) * 0.25);
            }
        }
    }

    #[test]
    fn galerkin_property_3d_small() {
        let spec = ProblemConfig::cube_3d(9, 0).build().unwrap();
        let sys = assemble(&spec).unwrap();
        let h = MgHierarchy::new(&sys.matrix, &sys.grid, MgOptions { levels: Some(2), ..MgOptions::default() }).unwrap();
        let (p, r) = (h.prolongation(0), h.restriction(0));
        let nc = p.ncols();
        let x = random_complex(nc, 1);
        let lhs = h.operator(1).matvec(&x).unwrap();
        let rhs = r.matvec(&sys.matrix.matvec(&p.matvec(&x).unwrap()).unwrap()).unwrap();
        let d: Vec<Complex> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        assert!(norm2(&d) <= 1e-12 * norm2(&rhs));
    }

    #[test]
    fn single_level_is_direct_solve() {
        let (a, grid) = poisson(2, 9);
        let h = MgHierarchy::new(&a, &grid, MgOptions { levels: Some(1), ..MgOptions::default() }).unwrap();
        let r = random_complex(81, 2);
        let x = h.vcycle(&r);
        let res = a.residual(&r, &x).unwrap();
        assert!(norm2(&res) <= 1e-12 * norm2(&r));
    }

    #[test]
    fn vcycle_is_linear_and_maps_zero() {
        let spec = ProblemConfig::square_2d(17, 0).build().unwrap();
        let sys = assemble(&spec).unwrap();
        let h = Arc::new(MgHierarchy::new(&sys.matrix, &sys.grid, MgOptions::default()).unwrap());
        let m = MgPreconditioner::new(h);
        assert!(m.is_linear());
        let n = sys.size();
        assert!(m.apply(&zeros(n)).iter().all(|v| *v == ZERO));
        let (r1, r2) = (random_complex(n, 3), random_complex(n, 4));
        let (al, be) = (Complex::new(1.5, -0.5), Complex::new(0.0, 2.0));
        let comb: Vec<Complex> = r1.iter().zip(&r2).map(|(x, y)| al * x + be * y).collect();
        let lhs = m.apply(&comb);
        let rhs: Vec<Complex> = m.apply(&r1).iter().zip(m.apply(&r2)).map(|(x, y)| al * x + be * y).collect();
        let d: Vec<Complex> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        assert!(norm2(&d) <= 1e-12 * norm2(&rhs));
    }

    #[test]
    fn poisson_contraction_per_cycle() {
        let (a, grid) = poisson(2, 33);
        let h = Arc::new(MgHierarchy::new(&a, &grid, MgOptions::default()).unwrap());
        let m = MgPreconditioner::new(h);
        let b = random_complex(a.nrows(), 5);
        let out = richardson(&a, &b, &m, &SolveControl::default().with_max_iters(6)).unwrap();
        let hist = &out.report.residual_history;
        for w in hist.windows(2).skip(1) {
            assert!(w[1] / w[0] <= 0.2, "contraction {}", w[1] / w[0]);
        }
    }

    #[test]
    fn zero_correction_reproduces_plain_cycle() {
        let spec = ProblemConfig::square_2d(17, 1).build().unwrap();
        let sys = assemble(&spec).unwrap();
        let h = Arc::new(MgHierarchy::new(&sys.matrix, &sys.grid, MgOptions::default()).unwrap());
        let plain = MgPreconditioner::new(h.clone());
        let hybrid = MgPreconditioner::with_finest_correction(h, Box::new(ZeroOperator));
        let r = random_complex(sys.size(), 6);
        assert_eq!(plain.apply(&r), hybrid.apply(&r));
        assert_eq!(hybrid.name(), "zero-mg-2-1-2");
    }

    #[test]
    fn gmres_with_vcycle_on_poisson() {
        let mut counts = Vec::new();
        for m in [17, 33] {
            let (a, grid) = poisson(2, m);
            let h = Arc::new(MgHierarchy::new(&a, &grid, MgOptions::default()).unwrap());
            let b = random_complex(a.nrows(), 7);
            let out = gmres(&a, &b, &MgPreconditioner::new(h), &SolveControl::default()).unwrap();
            assert!(out.report.converged);
            counts.push(out.report.iterations);
        }
        assert!(counts[0].abs_diff(counts[1]) <= 3, "{counts:?}");
    }
}
