//! Preconditioned Richardson iteration `u ← u + M(f − A u)` and its hybrid
//! two-operator variant.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::vector::{add_assign, is_finite, norm2, zeros};
use crate::linalg::{Complex, ComplexCsrMatrix};

use super::precond::Preconditioner;
use super::report::{ConvergenceReport, SolveControl, SolveOutcome};

enum Step {
    Continue,
    Converged,
    Diverged,
}

struct Driver<'a> {
    a: &'a ComplexCsrMatrix,
    b: &'a [Complex],
    bnorm: f64,
    control: &'a SolveControl,
    u: Vec<Complex>,
    r: Vec<Complex>,
    report: ConvergenceReport,
}

impl<'a> Driver<'a> {
    fn new(
        a: &'a ComplexCsrMatrix,
        b: &'a [Complex],
        control: &'a SolveControl,
        report: ConvergenceReport,
    ) -> Result<Self> {
        check(a, b, control)?;
        let bnorm = norm2(b);
        let mut report = report;
        report.residual_history.push(if bnorm == 0.0 { 0.0 } else { 1.0 });
        Ok(Self {
            a,
            b,
            bnorm,
            control,
            u: zeros(b.len()),
            r: b.to_vec(),
            report,
        })
    }

    fn rel(&self) -> f64 {
        if self.bnorm == 0.0 {
            norm2(&self.r)
        } else {
            norm2(&self.r) / self.bnorm
        }
    }

    fn step(&mut self, m: &dyn Preconditioner) -> Step {
        let z = m.apply(&self.r);
        add_assign(&mut self.u, &z);
        self.r = self.a.residual(self.b, &self.u).expect("sizes checked");
        self.report.iterations += 1;
        self.report.matvecs += 1;
        let rel = self.rel();
        self.report.residual_history.push(rel);
        if !rel.is_finite() || !is_finite(&self.u) || rel > self.control.divergence {
            Step::Diverged
        } else if rel <= self.control.tol {
            Step::Converged
        } else {
            Step::Continue
        }
    }

    fn finish(mut self, outcome: Step, start: Instant) -> SolveOutcome {
        match outcome {
            Step::Converged => self.report.converged = true,
            Step::Diverged => self.report.diverged = true,
            Step::Continue => {}
        }
        self.report.final_residual = self.rel();
        self.report.wall_time = start.elapsed().as_secs_f64();
        SolveOutcome {
            solution: self.u,
            report: self.report,
        }
    }
}

pub(crate) fn check(a: &ComplexCsrMatrix, b: &[Complex], control: &SolveControl) -> Result<()> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if !(control.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", control.tol)));
    }
    Ok(())
}

/// Richardson iteration from `u = 0`.
///
/// Stops when the relative residual drops below `control.tol`, after
/// `control.max_iters` iterations, or when it exceeds `control.divergence`.
/// Divergence is reported, not raised.
pub fn richardson(
    a: &ComplexCsrMatrix,
    b: &[Complex],
    m: &dyn Preconditioner,
    control: &SolveControl,
) -> Result<SolveOutcome> {
    let start = Instant::now();
    let mut d = Driver::new(a, b, control, ConvergenceReport::new("richardson", &m.name()))?;
    if d.rel() <= control.tol {
        return Ok(d.finish(Step::Converged, start));
    }
    let mut state = Step::Continue;
    while d.report.iterations < control.max_iters {
        state = d.step(m);
        if !matches!(state, Step::Continue) {
            break;
        }
    }
    Ok(d.finish(state, start))
}

/// Hybrid iteration: each cycle runs `n_r` Richardson steps with `m1`, then
/// one step with `m2`. Every substep counts as one iteration and is followed
/// by a convergence check.
pub fn hybrid_richardson(
    a: &ComplexCsrMatrix,
    b: &[Complex],
    m1: &dyn Preconditioner,
    m2: &dyn Preconditioner,
    n_r: usize,
    control: &SolveControl,
) -> Result<SolveOutcome> {
    if n_r == 0 {
        return Err(Error::InvalidArgument("hybrid iteration needs n_r >= 1".into()));
    }
    let start = Instant::now();
    let name = format!("{}+{}", m1.name(), m2.name());
    let mut d = Driver::new(a, b, control, ConvergenceReport::new("hybrid_richardson", &name))?;
    if d.rel() <= control.tol {
        return Ok(d.finish(Step::Converged, start));
    }
    let mut state = Step::Continue;
    'cycles: while d.report.iterations < control.max_iters {
        for sub in 0..=n_r {
            let m = if sub < n_r { m1 } else { m2 };
            state = d.step(m);
            if !matches!(state, Step::Continue) || d.report.iterations >= control.max_iters {
                break 'cycles;
            }
        }
    }
    Ok(d.finish(state, start))
}
