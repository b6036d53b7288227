use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Complex;

/// Stopping rule shared by all iterative drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveControl {
    /// Relative residual threshold `‖r‖₂ / ‖rhs‖₂`.
    pub tol: f64,
    pub max_iters: usize,
    /// Krylov dimension per GMRES cycle.
    pub restart: usize,
    /// Relative residual above which a run is declared divergent.
    pub divergence: f64,
    /// Allow nonlinear preconditioners inside Krylov methods.
    pub flexible: bool,
}

impl Default for SolveControl {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 2000,
            restart: 50,
            divergence: 1e6,
            flexible: false,
        }
    }
}

impl SolveControl {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_restart(mut self, restart: usize) -> Self {
        self.restart = restart;
        self
    }
}

/// Per-solve record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub solver: String,
    pub preconditioner: String,
    pub iterations: usize,
    pub matvecs: usize,
    /// Relative residual before the first iteration, then one entry per iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub diverged: bool,
    /// True relative residual at the returned iterate.
    pub final_residual: f64,
    pub wall_time: f64,
    pub rel_l2_error: Option<f64>,
}

impl ConvergenceReport {
    pub(crate) fn new(solver: &str, preconditioner: &str) -> Self {
        Self {
            solver: solver.to_string(),
            preconditioner: preconditioner.to_string(),
            iterations: 0,
            matvecs: 0,
            residual_history: Vec::new(),
            converged: false,
            diverged: false,
            final_residual: f64::NAN,
            wall_time: 0.0,
            rel_l2_error: None,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// `iteration,relative_residual` rows.
    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iteration", "relative_residual"])?;
        for (i, r) in self.residual_history.iter().enumerate() {
            w.write_record([i.to_string(), format!("{r:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solution plus its report.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: Vec<Complex>,
    pub report: ConvergenceReport,
}
