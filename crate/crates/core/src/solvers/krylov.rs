//! Right-preconditioned restarted GMRES and BiCGStab.
//!
//! GMRES keeps the preconditioned directions `z_j = M v_j` and updates the
//! iterate from them, so the same code serves as flexible GMRES when a
//! nonlinear preconditioner is explicitly allowed.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, is_finite, norm2, scale, zeros, ONE, ZERO};
use crate::linalg::{Complex, ComplexCsrMatrix};

use super::precond::Preconditioner;
use super::report::{ConvergenceReport, SolveControl, SolveOutcome};
use super::richardson::check;

fn gate(m: &dyn Preconditioner, control: &SolveControl) -> Result<()> {
    if !m.is_linear() && !control.flexible {
        return Err(Error::NonlinearPreconditioner(m.name()));
    }
    Ok(())
}

fn finish(
    mut report: ConvergenceReport,
    solution: Vec<Complex>,
    true_rel: f64,
    start: Instant,
) -> SolveOutcome {
    report.final_residual = true_rel;
    report.wall_time = start.elapsed().as_secs_f64();
    SolveOutcome { solution, report }
}

fn breakdown(
    solver: &'static str,
    reason: impl Into<String>,
    mut report: ConvergenceReport,
    start: Instant,
) -> Error {
    report.wall_time = start.elapsed().as_secs_f64();
    Error::Breakdown {
        solver,
        reason: reason.into(),
        partial: Box::new(report),
    }
}

/// Complex Givens rotation `(c, s)` with `[c s; −s̄ c]·[a; b] = [ρ; 0]`.
fn givens(a: Complex, b: Complex) -> (f64, Complex) {
    let na = a.norm();
    if na == 0.0 {
        return (0.0, ONE);
    }
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    (na / r, (a / na) * b.conj() / r)
}

fn rotate(c: f64, s: Complex, x: Complex, y: Complex) -> (Complex, Complex) {
    (x * c + s * y, -s.conj() * x + y * c)
}

/// Restarted GMRES(`control.restart`) from `u = 0`.
///
/// One iteration is one Arnoldi step. The residual history holds the
/// Givens estimate within a cycle; the last entry of each cycle is replaced by
/// the true residual recomputed at the restart.
pub fn gmres(
    a: &ComplexCsrMatrix,
    b: &[Complex],
    m: &dyn Preconditioner,
    control: &SolveControl,
) -> Result<SolveOutcome> {
    check(a, b, control)?;
    gate(m, control)?;
    if control.restart == 0 {
        return Err(Error::InvalidArgument("GMRES restart must be at least 1".into()));
    }
    let start = Instant::now();
    let n = b.len();
    let mut report = ConvergenceReport::new("gmres", &m.name());
    let bnorm = norm2(b);
    let mut x = zeros(n);
    if bnorm == 0.0 {
        report.residual_history.push(0.0);
        report.converged = true;
        return Ok(finish(report, x, 0.0, start));
    }
    report.residual_history.push(1.0);
    let mut r = b.to_vec();
    let mut rel = 1.0;
    let k = control.restart;

    while report.iterations < control.max_iters {
        let beta = norm2(&r);
        let mut v: Vec<Vec<Complex>> = Vec::with_capacity(k + 1);
        let mut z: Vec<Vec<Complex>> = Vec::with_capacity(k);
        let mut h: Vec<Vec<Complex>> = Vec::with_capacity(k);
        let mut cs: Vec<(f64, Complex)> = Vec::with_capacity(k);
        let mut g = vec![ZERO; k + 1];
        g[0] = Complex::new(beta, 0.0);
        let mut v0 = r.clone();
        scale(Complex::new(1.0 / beta, 0.0), &mut v0);
        v.push(v0);

        for j in 0..k {
            let zj = m.apply(&v[j]);
            let mut w = a.matvec(&zj)?;
            report.matvecs += 1;
            let mut col = vec![ZERO; j + 2];
            for _pass in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = dot(vi, &w);
                    axpy(-hij, vi, &mut w);
                    col[i] += hij;
                }
            }
            let hnext = norm2(&w);
            col[j + 1] = Complex::new(hnext, 0.0);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (p, q) = rotate(c, s, col[i], col[i + 1]);
                col[i] = p;
                col[i + 1] = q;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            let (p, _) = rotate(c, s, col[j], col[j + 1]);
            col[j] = p;
            col[j + 1] = ZERO;
            let (gj, gj1) = rotate(c, s, g[j], g[j + 1]);
            g[j] = gj;
            g[j + 1] = gj1;
            cs.push((c, s));
            h.push(col);
            z.push(zj);
            report.iterations += 1;
            let est = g[j + 1].norm() / bnorm;
            if !est.is_finite() || !hnext.is_finite() {
                report.residual_history.push(est);
                return Err(breakdown("gmres", "non-finite value in the Arnoldi recurrence", report, start));
            }
            report.residual_history.push(est);
            let happy = hnext <= f64::EPSILON * beta;
            if est <= control.tol || happy || report.iterations >= control.max_iters {
                break;
            }
            let mut vn = w;
            scale(Complex::new(1.0 / hnext, 0.0), &mut vn);
            v.push(vn);
        }

        // back substitution on the rotated Hessenberg matrix
        let kk = h.len();
        let mut y = vec![ZERO; kk];
        for i in (0..kk).rev() {
            let mut acc = g[i];
            for jj in i + 1..kk {
                acc -= h[jj][i] * y[jj];
            }
            if h[i][i] == ZERO {
                return Err(breakdown("gmres", "singular Hessenberg matrix", report, start));
            }
            y[i] = acc / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            axpy(*yi, zi, &mut x);
        }
        r = a.residual(b, &x)?;
        report.matvecs += 1;
        rel = norm2(&r) / bnorm;
        if let Some(last) = report.residual_history.last_mut() {
            *last = rel;
        }
        if !is_finite(&x) || !rel.is_finite() {
            return Err(breakdown("gmres", "non-finite iterate", report, start));
        }
        if rel <= control.tol {
            report.converged = true;
            break;
        }
        if rel > control.divergence {
            report.diverged = true;
            break;
        }
    }
    Ok(finish(report, x, rel, start))
}

/// Right-preconditioned BiCGStab from `u = 0`.
///
/// One iteration is one full step with two matrix-vector products and two
/// preconditioner applications. When the recurrence residual meets the
/// tolerance but the true residual does not, the method restarts from the
/// current iterate.
pub fn bicgstab(
    a: &ComplexCsrMatrix,
    b: &[Complex],
    m: &dyn Preconditioner,
    control: &SolveControl,
) -> Result<SolveOutcome> {
    check(a, b, control)?;
    gate(m, control)?;
    let start = Instant::now();
    let n = b.len();
    let mut report = ConvergenceReport::new("bicgstab", &m.name());
    let bnorm = norm2(b);
    let mut x = zeros(n);
    if bnorm == 0.0 {
        report.residual_history.push(0.0);
        report.converged = true;
        return Ok(finish(report, x, 0.0, start));
    }
    report.residual_history.push(1.0);
    let mut r = b.to_vec();
    let mut rel = 1.0;

    'restart: while report.iterations < control.max_iters {
        let r_hat = r.clone();
        let r_hat_norm = norm2(&r_hat);
        let mut rho = ONE;
        let mut alpha = ONE;
        let mut omega = ONE;
        let mut v = zeros(n);
        let mut p = zeros(n);

        while report.iterations < control.max_iters {
            let rho_new = dot(&r_hat, &r);
            if !rho_new.is_finite() || rho_new.norm() <= f64::EPSILON * f64::EPSILON * r_hat_norm * norm2(&r)
            {
                return Err(breakdown("bicgstab", "rho vanished", report, start));
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            let p_hat = m.apply(&p);
            v = a.matvec(&p_hat)?;
            let denom = dot(&r_hat, &v);
            if denom == ZERO || !denom.is_finite() {
                return Err(breakdown("bicgstab", "r_hat orthogonal to A M p", report, start));
            }
            alpha = rho / denom;
            let mut s = r.clone();
            axpy(-alpha, &v, &mut s);
            let s_hat = m.apply(&s);
            let t = a.matvec(&s_hat)?;
            report.matvecs += 2;
            let tt = dot(&t, &t).re;
            omega = if tt == 0.0 { ZERO } else { dot(&t, &s) / tt };
            axpy(alpha, &p_hat, &mut x);
            report.iterations += 1;
            if omega == ZERO {
                // s is already the residual of the updated iterate
                r = s;
                rel = norm2(&r) / bnorm;
                report.residual_history.push(rel);
                if rel <= control.tol {
                    break;
                }
                return Err(breakdown("bicgstab", "omega vanished", report, start));
            }
            axpy(omega, &s_hat, &mut x);
            r = s;
            axpy(-omega, &t, &mut r);
            rel = norm2(&r) / bnorm;
            report.residual_history.push(rel);
            if !rel.is_finite() || !is_finite(&x) {
                return Err(breakdown("bicgstab", "non-finite value in the recurrence", report, start));
            }
            if rel > control.divergence {
                report.diverged = true;
                break 'restart;
            }
            if rel <= control.tol {
                break;
            }
        }

        r = a.residual(b, &x)?;
        report.matvecs += 1;
        rel = norm2(&r) / bnorm;
        if let Some(last) = report.residual_history.last_mut() {
            *last = rel;
        }
        if rel <= control.tol {
            report.converged = true;
            break;
        }
    }
    Ok(finish(report, x, rel, start))
}
