//! Command-line interface.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bench::{run_cell, run_suite, CellOptions, PrecondKind, Problem, SolverKind, SuiteName, SuiteOptions};
use crate::config::ProblemConfig;
use crate::container::{Container, Tensor};
use crate::datagen::{direct_solve, generate_dataset, relative_residual, DatasetSpec};
use crate::deeponet::DeepOnetWeights;
use crate::error::{Error, Result};
use crate::mesh::StructuredGrid;
use crate::solvers::SolveControl;

#[derive(Debug, Parser)]
#[command(name = "helmkit", version, about = "Helmholtz scattering solvers with neural-operator preconditioners")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scatterer-free training dataset.
    GenData(GenDataArgs),
    /// Solve a problem directly and store the solution.
    Reference(ReferenceArgs),
    /// Run one solver/preconditioner combination.
    Solve(SolveArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
    /// Evaluate the trunk net at the grid nodes.
    ExportTrunk(ExportTrunkArgs),
    /// Print a container header.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Dataset spec as JSON; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use g = 0 for every sample.
    #[arg(long)]
    pub homogeneous_g: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Problem config JSON; defaults to the 2D square scatterer.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ProblemArgs {
    fn load(&self) -> Result<ProblemConfig> {
        let mut cfg = match &self.config {
            Some(p) => ProblemConfig::load(p)?,
            None => ProblemConfig::square_2d(33, 0),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CellArgs {
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Coarse dimension of the two-level preconditioner.
    #[arg(long, default_value_t = 32)]
    pub tb_size: usize,
    /// Relaxation steps per neural-operator step.
    #[arg(long, default_value_t = 1)]
    pub nr: usize,
    /// Relaxation factor for the relaxation solver or preconditioner.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 50)]
    pub restart: usize,
}

impl CellArgs {
    fn options(&self) -> CellOptions {
        CellOptions {
            omega: self.omega,
            tb_size: self.tb_size,
            nr: self.nr,
            control: SolveControl::default()
                .with_tol(self.tol)
                .with_max_iters(self.max_iters)
                .with_restart(self.restart),
            ..CellOptions::default()
        }
    }

    fn weights(&self) -> Result<Option<Arc<DeepOnetWeights>>> {
        self.weights
            .as_deref()
            .map(|p| DeepOnetWeights::load(p).map(Arc::new))
            .transpose()
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = SolverKind::Gmres)]
    pub solver: SolverKind,
    #[arg(long, value_enum, default_value_t = PrecondKind::None)]
    pub precond: PrecondKind,
    #[command(flatten)]
    pub cell: CellArgs,
    /// Also solve directly and report the relative L2 error.
    #[arg(long)]
    pub check: bool,
    /// Report JSON path; the residual history goes next to it as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: SuiteName,
    /// Replaces the suite's default problem.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grid size of the default problem.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target mean wave numbers for sweep_k.
    #[arg(long, value_delimiter = ',', default_value = "6,12,18,24,30,36")]
    pub k_list: Vec<f64>,
    #[command(flatten)]
    pub cell: CellArgs,
    /// Output directory for `<suite>.csv` and `<suite>.json`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportTrunkArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Grid taken from this problem config; otherwise --m on the weights' dimension.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
}

fn history_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    report.with_file_name(format!("{stem}_history.csv"))
}

fn field_shape(grid: &StructuredGrid) -> Vec<usize> {
    vec![grid.nodes_per_axis(); grid.dim()]
}

/// Executes a parsed command line, writing human-readable progress to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => {
            let mut spec = match &a.config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None if a.dim == Some(3) => DatasetSpec::default_3d(),
                None => DatasetSpec::default_2d(),
            };
            if let Some(d) = a.dim {
                if d != spec.dim {
                    let base = if d == 3 { DatasetSpec::default_3d() } else { DatasetSpec::default_2d() };
                    spec = DatasetSpec { seed: spec.seed, n: spec.n, ..base };
                }
            }
            spec.m = a.m.unwrap_or(spec.m);
            spec.n = a.n.unwrap_or(spec.n);
            spec.seed = a.seed.unwrap_or(spec.seed);
            spec.homogeneous_g |= a.homogeneous_g;
            let ds = generate_dataset(&spec)?;
            ds.save(&a.out)?;
            println!("wrote {} samples ({}D, m = {}) to {}", ds.len(), spec.dim, spec.m, a.out.display());
        }
        Command::Reference(a) => {
            let cfg = a.problem.load()?;
            let problem = Problem::from_config(&cfg, None)?;
            let u = direct_solve(&problem.sys)?;
            let rel = relative_residual(&problem.sys, &u)?;
            let shape = field_shape(&problem.sys.grid);
            let mut c = Container::new(json!({
                "kind": "helmkit-reference",
                "config": cfg,
                "relative_residual": rel,
            }));
            c.insert("u_re", Tensor::f64(shape.clone(), u.iter().map(|v| v.re).collect())?)?;
            c.insert("u_im", Tensor::f64(shape.clone(), u.iter().map(|v| v.im).collect())?)?;
            c.insert("k", Tensor::f64(shape, problem.sys.k_field.clone())?)?;
            c.write(&a.out)?;
            println!("direct solve: relative residual {rel:.3e}; wrote {}", a.out.display());
        }
        Command::Solve(a) => {
            if a.precond.needs_weights() && a.cell.weights.is_none() {
                return Err(Error::Weights(format!("weights required for --precond {}", a.precond)));
            }
            let cfg = a.problem.load()?;
            let mut problem = Problem::from_config(&cfg, a.cell.weights()?)?;
            if a.check {
                problem = problem.with_reference()?;
            }
            let out = run_cell(&problem, a.solver, a.precond, &a.cell.options())?;
            let r = &out.report;
            println!(
                "{} / {}: converged={} iterations={} final_residual={:.3e} time={:.3}s{}",
                a.solver,
                r.preconditioner,
                r.converged,
                r.iterations,
                r.final_residual,
                r.wall_time,
                r.rel_l2_error.map(|e| format!(" rel_l2_error={e:.3e}")).unwrap_or_default()
            );
            if let Some(path) = &a.out {
                r.write_json(path)?;
                r.write_history_csv(&history_path(path))?;
            }
        }
        Command::Bench(a) => {
            let config = a.config.as_deref().map(ProblemConfig::load).transpose()?;
            let opts = SuiteOptions {
                config,
                m: a.m,
                seed: a.seed,
                k_list: a.k_list.clone(),
                weights: a.cell.weights()?,
                cell: a.cell.options(),
            };
            let res = run_suite(a.suite, &opts)?;
            for n in &res.notices {
                println!("note: {n}");
            }
            for f in &res.failures {
                println!("failed: {}/{} at k_mean {:.2}: {}", f.solver, f.precond, f.k_mean, f.message);
            }
            std::fs::create_dir_all(&a.out)?;
            let csv = a.out.join(format!("{}.csv", a.suite));
            res.write_csv(&csv)?;
            res.write_json(&a.out.join(format!("{}.json", a.suite)))?;
            println!("{} rows written to {}", res.rows.len(), csv.display());
        }
        Command::ExportTrunk(a) => {
            let w = DeepOnetWeights::load(&a.weights)?;
            let grid = match (&a.config, a.m) {
                (Some(p), _) => ProblemConfig::load(p)?.grid()?,
                (None, Some(m)) => StructuredGrid::new(w.meta().dim, m)?,
                (None, None) => return Err(Error::InvalidArgument("export-trunk needs --config or --m".into())),
            };
            let points: Vec<[f64; 3]> = (0..grid.num_nodes()).map(|i| grid.coords(i)).collect();
            let t = w.trunk_eval(&points);
            let mut c = Container::new(json!({
                "kind": "helmkit-trunk",
                "grid": {"dim": grid.dim(), "m": grid.nodes_per_axis(), "order": "x_fastest"},
            }));
            c.insert("T", Tensor::f64(vec![t.nrows(), t.ncols()], t.as_slice().to_vec())?)?;
            c.write(&a.out)?;
            println!("trunk basis {}x{} written to {}", t.nrows(), t.ncols(), a.out.display());
        }
        Command::Inspect(a) => {
            print!("{}", Container::read(&a.path)?.describe());
        }
    }
    Ok(())
}
