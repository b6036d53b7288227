//! Solver/preconditioner cells and the benchmark suites built from them.

use std::fmt;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, AssembledSystem};
use crate::config::ProblemConfig;
use crate::datagen::{direct_solve, relative_l2};
use crate::deeponet::{DeepOnetWeights, NoPreconditioner};
use crate::error::{Error, Result};
use crate::linalg::{Complex, ComplexCsrMatrix};
use crate::multigrid::{MgHierarchy, MgOptions, MgPreconditioner};
use crate::solvers::{
    bicgstab, gmres, hybrid_richardson, richardson, Identity, Ilu0Preconditioner, Preconditioner, Relaxation,
    RelaxationKind, RelaxationSpec, SolveControl, SolveOutcome,
};
use crate::tb::{build_tb, sine_basis, Composition, Selection, TbCoarseSpace, TwoLevel};

/// Default over-relaxation factor for SOR and SSOR.
pub const DEFAULT_SOR_OMEGA: f64 = 1.5;
/// Damping of the Jacobi smoother inside the two-level preconditioner.
pub const TB_SMOOTHER_OMEGA: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Jacobi,
    Gs,
    Sor,
    Ssor,
    Gmres,
    Bicgstab,
    Richardson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondKind {
    None,
    Jacobi,
    Gs,
    Sor,
    Ssor,
    Ilu0,
    Tb,
    Deeponet,
    Mg,
    DeeponetMg,
}

fn value_label<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&value_label(self))
    }
}

impl fmt::Display for PrecondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&value_label(self))
    }
}

impl SolverKind {
    fn relaxation(self) -> Option<RelaxationKind> {
        match self {
            SolverKind::Jacobi => Some(RelaxationKind::Jacobi),
            SolverKind::Gs => Some(RelaxationKind::GaussSeidel),
            SolverKind::Sor => Some(RelaxationKind::Sor),
            SolverKind::Ssor => Some(RelaxationKind::Ssor),
            _ => None,
        }
    }
}

impl PrecondKind {
    pub fn needs_weights(self) -> bool {
        matches!(self, PrecondKind::Deeponet | PrecondKind::DeeponetMg)
    }

    fn relaxation(self) -> Option<RelaxationKind> {
        match self {
            PrecondKind::Jacobi => Some(RelaxationKind::Jacobi),
            PrecondKind::Gs => Some(RelaxationKind::GaussSeidel),
            PrecondKind::Sor => Some(RelaxationKind::Sor),
            PrecondKind::Ssor => Some(RelaxationKind::Ssor),
            _ => None,
        }
    }
}

/// Relaxation with `omega` where it applies; SOR/SSOR default to 1.5 and
/// Jacobi to ω = 1.
pub fn relaxation_spec(kind: RelaxationKind, omega: Option<f64>) -> RelaxationSpec {
    match kind {
        RelaxationKind::Jacobi => omega.map_or_else(RelaxationSpec::jacobi, RelaxationSpec::damped_jacobi),
        RelaxationKind::GaussSeidel => RelaxationSpec::gauss_seidel(),
        RelaxationKind::Sor => RelaxationSpec::sor(omega.unwrap_or(DEFAULT_SOR_OMEGA)),
        RelaxationKind::Ssor => RelaxationSpec::ssor(omega.unwrap_or(DEFAULT_SOR_OMEGA)),
    }
}

/// Settings shared by every cell of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOptions {
    pub omega: Option<f64>,
    /// Coarse dimension of the two-level preconditioner.
    pub tb_size: usize,
    /// Relaxation steps per neural-operator step in hybrid iterations.
    pub nr: usize,
    pub tb_selection: Selection,
    pub control: SolveControl,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            omega: None,
            tb_size: 32,
            nr: 1,
            tb_selection: Selection::Natural,
            control: SolveControl::default(),
        }
    }
}

/// An assembled problem with optional weights and direct reference solution.
pub struct Problem {
    pub sys: AssembledSystem,
    pub matrix: Arc<ComplexCsrMatrix>,
    pub weights: Option<Arc<DeepOnetWeights>>,
    pub reference: Option<Vec<Complex>>,
}

impl Problem {
    pub fn new(sys: AssembledSystem, weights: Option<Arc<DeepOnetWeights>>) -> Self {
        Self {
            matrix: Arc::new(sys.matrix.clone()),
            sys,
            weights,
            reference: None,
        }
    }

    pub fn from_config(cfg: &ProblemConfig, weights: Option<Arc<DeepOnetWeights>>) -> Result<Self> {
        Ok(Self::new(assemble(&cfg.build()?)?, weights))
    }

    /// Adds the band-LU reference solution.
    pub fn with_reference(mut self) -> Result<Self> {
        self.reference = Some(direct_solve(&self.sys)?);
        Ok(self)
    }

    fn weights(&self, kind: PrecondKind) -> Result<Arc<DeepOnetWeights>> {
        self.weights
            .clone()
            .ok_or_else(|| Error::Weights(format!("weights required for the '{kind}' preconditioner")))
    }

    fn coarse_space(&self, opts: &CellOptions) -> Result<TbCoarseSpace> {
        match &self.weights {
            Some(w) => build_tb(w, &self.sys.matrix, &self.sys.grid, opts.tb_size, &opts.tb_selection),
            None => {
                let basis = sine_basis(&self.sys.grid, opts.tb_size)?;
                TbCoarseSpace::from_basis(&self.sys.matrix, &basis, opts.tb_size, &Selection::Natural)
            }
        }
    }
}

/// Builds the preconditioner for `kind`. The two-level preconditioner uses
/// trunk outputs when weights are present and low-frequency sine modes
/// otherwise.
pub fn build_preconditioner(kind: PrecondKind, problem: &Problem, opts: &CellOptions) -> Result<Box<dyn Preconditioner>> {
    if let Some(r) = kind.relaxation() {
        return Ok(Box::new(Relaxation::new(relaxation_spec(r, opts.omega), problem.matrix.clone())?));
    }
    Ok(match kind {
        PrecondKind::None => Box::new(Identity),
        PrecondKind::Ilu0 => Box::new(Ilu0Preconditioner::new(&problem.matrix)?),
        PrecondKind::Tb => {
            let smoother = Relaxation::new(RelaxationSpec::damped_jacobi(TB_SMOOTHER_OMEGA), problem.matrix.clone())?;
            Box::new(TwoLevel::new(
                Arc::new(problem.coarse_space(opts)?),
                Some(Box::new(smoother)),
                problem.matrix.clone(),
                Composition::Multiplicative,
            )?)
        }
        PrecondKind::Deeponet => Box::new(NoPreconditioner::new(problem.weights(kind)?, &problem.sys)?),
        PrecondKind::Mg => {
            let h = MgHierarchy::new(&problem.matrix, &problem.sys.grid, MgOptions::v(3, 2))?;
            Box::new(MgPreconditioner::new(Arc::new(h)))
        }
        PrecondKind::DeeponetMg => {
            let no = NoPreconditioner::new(problem.weights(kind)?, &problem.sys)?;
            let h = MgHierarchy::new(&problem.matrix, &problem.sys.grid, MgOptions::v(2, 2))?;
            Box::new(MgPreconditioner::with_finest_correction(Arc::new(h), Box::new(no)))
        }
        _ => unreachable!("relaxations handled above"),
    })
}

/// Runs one (solver, preconditioner) cell.
///
/// Relaxation solvers run plain Richardson with that relaxation when
/// `precond` is `none`, and otherwise the hybrid iteration alternating
/// `opts.nr` relaxation steps with one `precond` step. Krylov methods switch
/// to flexible mode for nonlinear preconditioners.
pub fn run_cell(problem: &Problem, solver: SolverKind, precond: PrecondKind, opts: &CellOptions) -> Result<SolveOutcome> {
    let (a, b) = (&problem.sys.matrix, &problem.sys.rhs);
    let m = build_preconditioner(precond, problem, opts)?;
    let mut out = match solver.relaxation() {
        Some(r) => {
            let relax = Relaxation::new(relaxation_spec(r, opts.omega), problem.matrix.clone())?;
            if precond == PrecondKind::None {
                richardson(a, b, &relax, &opts.control)?
            } else {
                hybrid_richardson(a, b, &relax, m.as_ref(), opts.nr, &opts.control)?
            }
        }
        None => {
            let control = SolveControl {
                flexible: opts.control.flexible || !m.is_linear(),
                ..opts.control
            };
            match solver {
                SolverKind::Gmres => gmres(a, b, m.as_ref(), &control)?,
                SolverKind::Bicgstab => bicgstab(a, b, m.as_ref(), &control)?,
                _ => richardson(a, b, m.as_ref(), &control)?,
            }
        }
    };
    if let Some(u_ref) = &problem.reference {
        out.report.rel_l2_error = Some(relative_l2(&out.solution, u_ref)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SuiteName {
    Cube,
    Submarine,
    SweepK,
    RelaxationDivergence,
    MgCompare,
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&value_label(self))
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// Base problem; each suite has its own default.
    pub config: Option<ProblemConfig>,
    /// Grid size override for the default problem.
    pub m: Option<usize>,
    pub seed: u64,
    /// Target mean wave numbers for `sweep_k`.
    pub k_list: Vec<f64>,
    pub weights: Option<Arc<DeepOnetWeights>>,
    pub cell: CellOptions,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            config: None,
            m: None,
            seed: 0,
            k_list: vec![6.0, 12.0, 18.0, 24.0, 30.0, 36.0],
            weights: None,
            cell: CellOptions::default(),
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub solver: String,
    pub precond: String,
    pub k_mean: f64,
    pub iterations: usize,
    pub time_s: f64,
    pub rel_l2_error: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub solver: String,
    pub precond: String,
    pub k_mean: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: SuiteName,
    pub rows: Vec<BenchRow>,
    pub failures: Vec<CellFailure>,
    /// Skipped cells and similar remarks.
    pub notices: Vec<String>,
}

impl SuiteResult {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn row(&self, solver: SolverKind, precond: PrecondKind) -> Option<&BenchRow> {
        let (s, p) = (solver.to_string(), precond.to_string());
        self.rows.iter().find(|r| r.solver == s && r.precond == p)
    }
}

fn suite_plan(suite: SuiteName) -> Vec<(SolverKind, PrecondKind)> {
    use PrecondKind as P;
    use SolverKind as S;
    match suite {
        SuiteName::Cube | SuiteName::Submarine => vec![
            (S::Gmres, P::None),
            (S::Gmres, P::Ilu0),
            (S::Gmres, P::Tb),
            (S::Gmres, P::Deeponet),
            (S::Bicgstab, P::None),
            (S::Bicgstab, P::Ilu0),
            (S::Bicgstab, P::Tb),
            (S::Bicgstab, P::Deeponet),
        ],
        SuiteName::SweepK => vec![
            (S::Gmres, P::None),
            (S::Gmres, P::Tb),
            (S::Bicgstab, P::None),
            (S::Bicgstab, P::Tb),
        ],
        SuiteName::RelaxationDivergence => {
            let relax = [S::Jacobi, S::Gs, S::Sor, S::Ssor];
            relax
                .iter()
                .map(|&s| (s, P::None))
                .chain(relax.iter().map(|&s| (s, P::Deeponet)))
                .collect()
        }
        SuiteName::MgCompare => vec![
            (S::Gmres, P::Mg),
            (S::Gmres, P::DeeponetMg),
            (S::Richardson, P::Mg),
            (S::Richardson, P::DeeponetMg),
        ],
    }
}

fn base_configs(suite: SuiteName, opts: &SuiteOptions) -> Vec<ProblemConfig> {
    let seed = opts.seed;
    let base = opts.config.clone().unwrap_or_else(|| match suite {
        SuiteName::Cube => ProblemConfig::cube_3d(opts.m.unwrap_or(17), seed),
        SuiteName::Submarine => ProblemConfig::submarine_3d(opts.m.unwrap_or(17), seed),
        _ => ProblemConfig::square_2d(opts.m.unwrap_or(33), seed),
    });
    if suite == SuiteName::SweepK {
        opts.k_list
            .iter()
            .map(|&k| ProblemConfig {
                k_target_mean: Some(k),
                ..base.clone()
            })
            .collect()
    } else {
        vec![base]
    }
}

/// Runs every cell of `suite` against one assembled system and one direct
/// reference per problem. Cell failures are recorded and the suite goes on;
/// neural-operator cells are skipped without weights.
pub fn run_suite(suite: SuiteName, opts: &SuiteOptions) -> Result<SuiteResult> {
    let mut result = SuiteResult {
        suite,
        rows: Vec::new(),
        failures: Vec::new(),
        notices: Vec::new(),
    };
    let plan = suite_plan(suite);
    if opts.weights.is_none() {
        let skipped: Vec<String> = plan
            .iter()
            .filter(|(_, p)| p.needs_weights())
            .map(|(s, p)| format!("{s}/{p}"))
            .collect();
        if !skipped.is_empty() {
            result.notices.push(format!("no weights given; skipped {}", skipped.join(", ")));
        }
        if plan.iter().any(|(_, p)| *p == PrecondKind::Tb) {
            result
                .notices
                .push(format!("no weights given; tb uses {} sine modes", opts.cell.tb_size));
        }
    }
    for cfg in base_configs(suite, opts) {
        let problem = Problem::from_config(&cfg, opts.weights.clone())?.with_reference()?;
        let k_mean = problem.sys.k_field.iter().sum::<f64>() / problem.sys.k_field.len() as f64;
        for &(solver, precond) in &plan {
            if precond.needs_weights() && problem.weights.is_none() {
                continue;
            }
            let start = Instant::now();
            match run_cell(&problem, solver, precond, &opts.cell) {
                Ok(out) => result.rows.push(BenchRow {
                    solver: solver.to_string(),
                    precond: precond.to_string(),
                    k_mean,
                    iterations: out.report.iterations,
                    time_s: out.report.wall_time,
                    rel_l2_error: out.report.rel_l2_error,
                    converged: out.report.converged,
                }),
                Err(e) => {
                    let iterations = match &e {
                        Error::Breakdown { partial, .. } => partial.iterations,
                        _ => 0,
                    };
                    result.rows.push(BenchRow {
                        solver: solver.to_string(),
                        precond: precond.to_string(),
                        k_mean,
                        iterations,
                        time_s: start.elapsed().as_secs_f64(),
                        rel_l2_error: None,
                        converged: false,
                    });
                    result.failures.push(CellFailure {
                        solver: solver.to_string(),
                        precond: precond.to_string(),
                        k_mean,
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deeponet::DeepOnetMeta;

    fn small_problem() -> Problem {
        Problem::from_config(&ProblemConfig::square_2d(17, 0), None)
            .unwrap()
            .with_reference()
            .unwrap()
    }

    #[test]
    fn labels_match_flag_values() {
        assert_eq!(PrecondKind::DeeponetMg.to_string(), "deeponet-mg");
        assert_eq!(SolverKind::Bicgstab.to_string(), "bicgstab");
        assert_eq!(SuiteName::SweepK.to_string(), "sweep_k");
        assert_eq!(SuiteName::from_str("relaxation_divergence", false).unwrap(), SuiteName::RelaxationDivergence);
    }

    #[test]
    fn relaxation_defaults() {
        assert_eq!(relaxation_spec(RelaxationKind::Sor, None), RelaxationSpec::sor(1.5));
        assert_eq!(relaxation_spec(RelaxationKind::Jacobi, None), RelaxationSpec::jacobi());
        assert_eq!(relaxation_spec(RelaxationKind::Jacobi, Some(0.5)), RelaxationSpec::damped_jacobi(0.5));
    }

    #[test]
    fn krylov_cells_match_reference() {
        let p = small_problem();
        for (s, pc) in [
            (SolverKind::Gmres, PrecondKind::None),
            (SolverKind::Bicgstab, PrecondKind::Ilu0),
            (SolverKind::Gmres, PrecondKind::Mg),
            (SolverKind::Gmres, PrecondKind::Tb),
        ] {
            let out = run_cell(&p, s, pc, &CellOptions::default()).unwrap();
            assert!(out.report.converged, "{s}/{pc}");
            assert!(out.report.rel_l2_error.unwrap() < 1e-8, "{s}/{pc}");
        }
    }

    #[test]
    fn deeponet_without_weights_is_rejected() {
        let p = small_problem();
        let err = run_cell(&p, SolverKind::Gmres, PrecondKind::Deeponet, &CellOptions::default()).unwrap_err();
        assert!(err.to_string().contains("weights required"));
    }

    #[test]
    fn nonlinear_cells_run_flexibly() {
        let mut meta = DeepOnetMeta::default_2d();
        meta.m_b = 33;
        let w = Arc::new(DeepOnetWeights::random(meta, 1).unwrap());
        let p = Problem::from_config(&ProblemConfig::square_2d(17, 0), Some(w)).unwrap();
        let opts = CellOptions {
            control: SolveControl::default().with_max_iters(30),
            ..CellOptions::default()
        };
        let out = run_cell(&p, SolverKind::Gmres, PrecondKind::DeeponetMg, &opts).unwrap();
        assert!(out.report.preconditioner.starts_with("deeponet-mg"));
        let hybrid = run_cell(&p, SolverKind::Jacobi, PrecondKind::Deeponet, &opts).unwrap();
        assert_eq!(hybrid.report.preconditioner, "jacobi+deeponet");
    }

    #[test]
    fn suite_without_weights_skips_and_notes() {
        let opts = SuiteOptions {
            m: Some(17),
            cell: CellOptions {
                control: SolveControl::default().with_max_iters(50),
                ..CellOptions::default()
            },
            ..SuiteOptions::default()
        };
        let res = run_suite(SuiteName::RelaxationDivergence, &opts).unwrap();
        assert_eq!(res.rows.len(), 4);
        assert!(res.rows.iter().all(|r| !r.converged));
        assert!(res.notices[0].contains("skipped"));
    }

    #[test]
    fn sweep_rows_per_wavenumber() {
        let opts = SuiteOptions {
            m: Some(9),
            k_list: vec![6.0, 12.0],
            ..SuiteOptions::default()
        };
        let res = run_suite(SuiteName::SweepK, &opts).unwrap();
        assert_eq!(res.rows.len(), 8);
        assert!(res.rows[4].k_mean > 1.9 * res.rows[0].k_mean);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        res.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("solver,precond,k_mean,iterations,time_s,rel_l2_error,converged"));
    }
}
