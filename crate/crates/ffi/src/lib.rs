//! C interface to helmkit.
//!
//! Problems and weights are opaque handles created by the `helm_problem_*`
//! constructors and `helm_weights_load`, and released with the matching
//! `*_free`. Every fallible call
//! returns a [`HelmStatus`]; on failure the message is available from
//! [`helm_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use helmkit::bench::{run_cell, CellOptions, PrecondKind, Problem, SolverKind};
use helmkit::config::ProblemConfig;
use helmkit::datagen::direct_solve;
use helmkit::deeponet::DeepOnetWeights;
use helmkit::solvers::SolveControl;
use helmkit::{Complex, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Numerical = 5,
    Weights = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelmSolver {
    Jacobi = 0,
    Gs = 1,
    Sor = 2,
    Ssor = 3,
    Gmres = 4,
    Bicgstab = 5,
    Richardson = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelmPrecond {
    None = 0,
    Jacobi = 1,
    Gs = 2,
    Sor = 3,
    Ssor = 4,
    Ilu0 = 5,
    Tb = 6,
    Deeponet = 7,
    Mg = 8,
    DeeponetMg = 9,
}

/// Solver settings; start from [`helm_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HelmSolveOptions {
    pub solver: HelmSolver,
    pub precond: HelmPrecond,
    pub tol: f64,
    pub max_iters: usize,
    pub restart: usize,
    pub tb_size: usize,
    pub nr: usize,
    /// Relaxation factor; NaN selects the default.
    pub omega: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HelmSolveResult {
    pub iterations: usize,
    pub matvecs: usize,
    pub converged: bool,
    pub diverged: bool,
    pub final_residual: f64,
    pub wall_time: f64,
}

/// Assembled Helmholtz problem.
pub struct HelmProblem {
    inner: Problem,
}

/// DeepONet weights.
pub struct HelmWeights {
    inner: Arc<DeepOnetWeights>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HelmStatus {
    match e {
        Error::Io(_) => HelmStatus::Io,
        Error::Format(_) | Error::Json(_) | Error::Csv(_) => HelmStatus::Format,
        Error::Weights(_) => HelmStatus::Weights,
        Error::Sample { source, .. } => status_of(source),
        Error::SingularTriangle { .. }
        | Error::SingularMatrix { .. }
        | Error::ZeroPivot { .. }
        | Error::Capacity { .. }
        | Error::RankDeficient { .. }
        | Error::Cholesky { .. }
        | Error::RejectionLimit { .. }
        | Error::Breakdown { .. } => HelmStatus::Numerical,
        _ => HelmStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HelmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HelmStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            HelmStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            HelmStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass pointers obtained from this library or valid C objects.
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: non-null and, per the API contract, NUL-terminated.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::Lib(Error::InvalidArgument(format!("{what} is not valid UTF-8"))))
}

fn out_slice<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: caller guarantees `len` writable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn store_problem(cfg: &ProblemConfig, out: *mut *mut HelmProblem) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    let inner = Problem::from_config(cfg, None)?;
    // SAFETY: `out` is non-null and writable.
    unsafe { *out = Box::into_raw(Box::new(HelmProblem { inner })) };
    Ok(())
}

fn write_solution(u: &[Complex], u_re: *mut f64, u_im: *mut f64, len: usize) -> Result<(), Failure> {
    if len != u.len() {
        return Err(Error::DimensionMismatch(format!("output buffers hold {len} values, problem has {}", u.len())).into());
    }
    let re = out_slice(u_re, len, "u_re")?;
    let im = out_slice(u_im, len, "u_im")?;
    for (i, v) in u.iter().enumerate() {
        re[i] = v.re;
        im[i] = v.im;
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn helm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn helm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a problem from a JSON problem description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn helm_problem_from_json(json: *const c_char, out: *mut *mut HelmProblem) -> HelmStatus {
    guard(|| {
        let cfg: ProblemConfig = serde_json::from_str(c_str(json, "json")?).map_err(Error::from)?;
        store_problem(&cfg, out)
    })
}

/// Builds a problem from a JSON problem description file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn helm_problem_load(path: *const c_char, out: *mut *mut HelmProblem) -> HelmStatus {
    guard(|| {
        let cfg = ProblemConfig::load(Path::new(c_str(path, "path")?))?;
        store_problem(&cfg, out)
    })
}

/// The 2D square-scatterer problem on an `m × m` grid.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn helm_problem_square_2d(m: usize, seed: u64, out: *mut *mut HelmProblem) -> HelmStatus {
    guard(|| store_problem(&ProblemConfig::square_2d(m, seed), out))
}

/// Number of unknowns, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn helm_problem_size(problem: *const HelmProblem) -> usize {
    // SAFETY: per contract.
    unsafe { problem.as_ref() }.map_or(0, |p| p.inner.sys.size())
}

/// # Safety
/// `problem` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn helm_problem_free(problem: *mut HelmProblem) {
    if !problem.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Loads DeepONet weights from a tensor container file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn helm_weights_load(path: *const c_char, out: *mut *mut HelmWeights) -> HelmStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let w = DeepOnetWeights::load(Path::new(c_str(path, "path")?))?;
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = Box::into_raw(Box::new(HelmWeights { inner: Arc::new(w) })) };
        Ok(())
    })
}

/// # Safety
/// `weights` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn helm_weights_free(weights: *mut HelmWeights) {
    if !weights.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(weights) });
    }
}

/// GMRES(50), no preconditioner, tol 1e-12, 2000 iterations, TB size 32,
/// one relaxation step per hybrid cycle.
#[no_mangle]
pub extern "C" fn helm_solve_options_default() -> HelmSolveOptions {
    let c = SolveControl::default();
    let cell = CellOptions::default();
    HelmSolveOptions {
        solver: HelmSolver::Gmres,
        precond: HelmPrecond::None,
        tol: c.tol,
        max_iters: c.max_iters,
        restart: c.restart,
        tb_size: cell.tb_size,
        nr: cell.nr,
        omega: f64::NAN,
    }
}

fn solver_kind(s: HelmSolver) -> SolverKind {
    match s {
        HelmSolver::Jacobi => SolverKind::Jacobi,
        HelmSolver::Gs => SolverKind::Gs,
        HelmSolver::Sor => SolverKind::Sor,
        HelmSolver::Ssor => SolverKind::Ssor,
        HelmSolver::Gmres => SolverKind::Gmres,
        HelmSolver::Bicgstab => SolverKind::Bicgstab,
        HelmSolver::Richardson => SolverKind::Richardson,
    }
}

fn precond_kind(p: HelmPrecond) -> PrecondKind {
    match p {
        HelmPrecond::None => PrecondKind::None,
        HelmPrecond::Jacobi => PrecondKind::Jacobi,
        HelmPrecond::Gs => PrecondKind::Gs,
        HelmPrecond::Sor => PrecondKind::Sor,
        HelmPrecond::Ssor => PrecondKind::Ssor,
        HelmPrecond::Ilu0 => PrecondKind::Ilu0,
        HelmPrecond::Tb => PrecondKind::Tb,
        HelmPrecond::Deeponet => PrecondKind::Deeponet,
        HelmPrecond::Mg => PrecondKind::Mg,
        HelmPrecond::DeeponetMg => PrecondKind::DeeponetMg,
    }
}

/// Runs the iterative solver and writes the solution into `u_re`/`u_im`,
/// each of length `len` (the problem size). `weights` may be NULL unless a
/// neural-operator preconditioner is selected; `result` may be NULL.
///
/// A run that stops without converging still returns `HELM_STATUS_OK`;
/// check `result->converged`.
///
/// # Safety
/// Pointers must be valid for the stated lengths; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn helm_solve(
    problem: *const HelmProblem,
    weights: *const HelmWeights,
    options: *const HelmSolveOptions,
    u_re: *mut f64,
    u_im: *mut f64,
    len: usize,
    result: *mut HelmSolveResult,
) -> HelmStatus {
    guard(|| {
        let p = non_null(problem, "problem")?;
        let o = non_null(options, "options")?;
        // SAFETY: NULL or a live handle, per contract.
        let w = unsafe { weights.as_ref() }.map(|w| w.inner.clone());
        let problem = Problem {
            sys: p.inner.sys.clone(),
            matrix: p.inner.matrix.clone(),
            weights: w,
            reference: None,
        };
        let opts = CellOptions {
            omega: (!o.omega.is_nan()).then_some(o.omega),
            tb_size: o.tb_size,
            nr: o.nr,
            control: SolveControl::default()
                .with_tol(o.tol)
                .with_max_iters(o.max_iters)
                .with_restart(o.restart),
            ..CellOptions::default()
        };
        let out = run_cell(&problem, solver_kind(o.solver), precond_kind(o.precond), &opts)?;
        write_solution(&out.solution, u_re, u_im, len)?;
        // SAFETY: NULL or writable, per contract.
        if let Some(r) = unsafe { result.as_mut() } {
            let rep = &out.report;
            *r = HelmSolveResult {
                iterations: rep.iterations,
                matvecs: rep.matvecs,
                converged: rep.converged,
                diverged: rep.diverged,
                final_residual: rep.final_residual,
                wall_time: rep.wall_time,
            };
        }
        Ok(())
    })
}

/// Direct band-LU solve into `u_re`/`u_im` of length `len`.
///
/// # Safety
/// Pointers must be valid for `len` doubles; `problem` must be live.
#[no_mangle]
pub unsafe extern "C" fn helm_direct_solve(
    problem: *const HelmProblem,
    u_re: *mut f64,
    u_im: *mut f64,
    len: usize,
) -> HelmStatus {
    guard(|| {
        let p = non_null(problem, "problem")?;
        let u = direct_solve(&p.inner.sys)?;
        write_solution(&u, u_re, u_im, len)
    })
}
