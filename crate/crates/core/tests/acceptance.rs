//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line straight to
//! stdout so it shows up even with captured test output.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use helmkit::assembly::{assemble, manufactured_problem};
use helmkit::config::ProblemConfig;
use helmkit::container::{Container, Tensor};
use helmkit::datagen::{direct_solve, relative_l2};
use helmkit::grf::{GrfParams, GrfSampler, GrfSpec};
use helmkit::linalg::vector::{norm2, norm_inf, sub};
use helmkit::linalg::{thin_qr, Complex, ComplexCsrMatrix, RealMatrix};
use helmkit::mesh::{mask_from_shapes, read_voxel_mask, write_voxel_mask, Shape, StructuredGrid};
use helmkit::multigrid::{MgHierarchy, MgOptions, MgPreconditioner};
use helmkit::solvers::{
    bicgstab, gmres, richardson, Identity, Preconditioner, Relaxation, RelaxationSpec, SolveControl,
};
use helmkit::tb::{sine_basis, Composition, Selection, TbCoarseSpace, TwoLevel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn report(id: u32, name: &str, ok: bool, detail: String, elapsed: Duration) {
    let line = format!(
        "[{}] criterion {id:>2} {name}: {detail} ({:.2}s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "criterion {id} failed: {detail}");
}

fn square_33() -> helmkit::assembly::AssembledSystem {
    assemble(&ProblemConfig::square_2d(33, 0).build().unwrap()).unwrap()
}

fn exact_error(m: usize) -> f64 {
    let (spec, exact) = manufactured_problem(StructuredGrid::new(2, m).unwrap(), 6.0);
    let u = direct_solve(&assemble(&spec).unwrap()).unwrap();
    norm_inf(&sub(&u, &exact))
}

#[test]
fn c01_discretization_order() {
    let t = Instant::now();
    let (e17, e33) = (exact_error(17), exact_error(33));
    let ratio = e17 / e33;
    let ok = (3.2..=4.8).contains(&ratio) && t.elapsed() < Duration::from_secs(10);
    report(
        1,
        "discretization order",
        ok,
        format!("max error {e17:.3e} -> {e33:.3e}, ratio {ratio:.3}"),
        t.elapsed(),
    );
}

#[test]
fn c02_direct_vs_krylov() {
    let t = Instant::now();
    let sys = square_33();
    let u_ref = direct_solve(&sys).unwrap();
    let control = SolveControl::default();
    let g = gmres(&sys.matrix, &sys.rhs, &Identity, &control).unwrap();
    let b = bicgstab(&sys.matrix, &sys.rhs, &Identity, &control).unwrap();
    let (eg, eb) = (
        relative_l2(&g.solution, &u_ref).unwrap(),
        relative_l2(&b.solution, &u_ref).unwrap(),
    );
    let ok = g.report.converged
        && b.report.converged
        && eg <= 1e-8
        && eb <= 1e-8
        && t.elapsed() < Duration::from_secs(60);
    report(
        2,
        "direct vs Krylov",
        ok,
        format!(
            "GMRES {} its err {eg:.2e}, BiCGStab {} its err {eb:.2e}",
            g.report.iterations, b.report.iterations
        ),
        t.elapsed(),
    );
}

#[test]
fn c03_relaxation_divergence() {
    let t = Instant::now();
    let sys = square_33();
    let a = Arc::new(sys.matrix.clone());
    let control = SolveControl::default();
    let mut parts = Vec::new();
    let mut ok = true;
    for spec in [
        RelaxationSpec::jacobi(),
        RelaxationSpec::gauss_seidel(),
        RelaxationSpec::sor(1.5),
        RelaxationSpec::ssor(1.5),
    ] {
        let m = Relaxation::new(spec, a.clone()).unwrap();
        let out = richardson(&sys.matrix, &sys.rhs, &m, &control).unwrap();
        let h = &out.report.residual_history;
        // growth: the last residual exceeds the initial one and the minimum reached
        let min = h.iter().copied().fold(f64::INFINITY, f64::min);
        let last = *h.last().unwrap();
        let growing = last > h[0] && last > 10.0 * min;
        ok &= !out.report.converged && growing;
        parts.push(format!("{} {:.1e}", m.name(), last));
    }
    ok &= t.elapsed() < Duration::from_secs(30);
    report(3, "relaxation divergence", ok, parts.join(", "), t.elapsed());
}

#[test]
fn c04_exact_coarse_space() {
    let t = Instant::now();
    let sys = assemble(&ProblemConfig::square_2d(9, 0).build().unwrap()).unwrap();
    let n = sys.size();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let basis = RealMatrix::from_row_major(n, n, (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
    let coarse = TbCoarseSpace::from_basis(&sys.matrix, &basis, n, &Selection::Natural).unwrap();
    let a = Arc::new(sys.matrix.clone());
    let m = TwoLevel::new(Arc::new(coarse), None, a, Composition::Multiplicative).unwrap();
    let out = gmres(&sys.matrix, &sys.rhs, &m, &SolveControl::default()).unwrap();
    let ok = out.report.iterations == 1
        && out.report.final_residual <= 1e-10
        && t.elapsed() < Duration::from_secs(5);
    report(
        4,
        "exact coarse space",
        ok,
        format!(
            "{} iteration(s), residual {:.2e}",
            out.report.iterations, out.report.final_residual
        ),
        t.elapsed(),
    );
}

#[test]
fn c05_tb_acceleration() {
    let t = Instant::now();
    let sys = square_33();
    let a = Arc::new(sys.matrix.clone());
    let control = SolveControl::default();
    let plain = gmres(&sys.matrix, &sys.rhs, &Identity, &control).unwrap();
    let coarse = TbCoarseSpace::from_basis(&sys.matrix, &sine_basis(&sys.grid, 32).unwrap(), 32, &Selection::Natural)
        .unwrap();
    let smoother = Relaxation::new(RelaxationSpec::damped_jacobi(2.0 / 3.0), a.clone()).unwrap();
    let m = TwoLevel::new(Arc::new(coarse), Some(Box::new(smoother)), a, Composition::Multiplicative).unwrap();
    let tb = gmres(&sys.matrix, &sys.rhs, &m, &control).unwrap();
    let (p, q) = (plain.report.iterations, tb.report.iterations);
    let ok = plain.report.converged
        && tb.report.converged
        && (q as f64) <= 0.5 * p as f64
        && t.elapsed() < Duration::from_secs(60);
    report(
        5,
        "TB acceleration",
        ok,
        format!("GMRES {p} -> TB-GMRES {q} iterations ({:.2}x)", q as f64 / p as f64),
        t.elapsed(),
    );
}

#[test]
fn c06_dirichlet_rows_after_jacobi() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut rows = 0;
    for seed in 0..10 {
        let mut cfg = ProblemConfig::square_2d(33, 100 + seed);
        cfg.g = helmkit::config::FieldSource::grf(ProblemConfig::G_F);
        let sys = assemble(&cfg.build().unwrap()).unwrap();
        let m = Relaxation::new(RelaxationSpec::jacobi(), Arc::new(sys.matrix.clone())).unwrap();
        let u = m.apply(&sys.residual(&vec![Complex::new(0.0, 0.0); sys.size()]).unwrap());
        let r = sys.residual(&u).unwrap();
        let mask = mask_from_shapes(&sys.grid, &cfg.scatterers).unwrap();
        for i in mask.indices() {
            worst = worst.max(r[i].norm());
            rows += 1;
        }
    }
    let ok = worst == 0.0 && rows > 0;
    report(
        6,
        "scatterer rows after one Jacobi sweep",
        ok,
        format!("max |r_i| = {worst:e} over {rows} rows in 10 draws"),
        t.elapsed(),
    );
}

#[test]
fn c07_qr_and_galerkin() {
    let t = Instant::now();
    let sys = assemble(&ProblemConfig::square_2d(9, 3).build().unwrap()).unwrap();
    let n = sys.size();
    let s = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let basis = RealMatrix::from_row_major(n, s, (0..n * s).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
    let coarse = TbCoarseSpace::from_basis(&sys.matrix, &basis, s, &Selection::Natural).unwrap();
    let q = coarse.q();
    let mut orth = 0.0f64;
    for i in 0..s {
        for j in 0..s {
            let dot: f64 = (0..n).map(|r| q.row(r)[i] * q.row(r)[j]).sum();
            orth = orth.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    // column application: A_c[:, j] = Qᵀ (A q_j)
    let mut gal = 0.0f64;
    let scale = coarse.coarse_matrix().as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
    for j in 0..s {
        let qj: Vec<Complex> = (0..n).map(|r| Complex::new(q.row(r)[j], 0.0)).collect();
        let aq = sys.matrix.matvec(&qj).unwrap();
        for i in 0..s {
            let v: Complex = (0..n).map(|r| aq[r] * q.row(r)[i]).sum();
            gal = gal.max((coarse.coarse_matrix().as_slice()[i * s + j] - v).norm() / scale);
        }
    }
    // independent check of the factorization
    let (q2, r2) = thin_qr(&basis).unwrap();
    let rebuilt = q2.matmul(&r2).unwrap();
    let recon = rebuilt
        .as_slice()
        .iter()
        .zip(basis.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let ok = orth <= 1e-12 && gal <= 1e-12 && recon <= 1e-12;
    report(
        7,
        "QR and Galerkin algebra",
        ok,
        format!("|QtQ-I|max {orth:.1e}, Galerkin rel diff {gal:.1e}, |QR-P|max {recon:.1e}"),
        t.elapsed(),
    );
}

fn poisson(m: usize) -> (ComplexCsrMatrix, StructuredGrid, Vec<Complex>) {
    let grid = StructuredGrid::new(2, m).unwrap();
    let (spec, _) = manufactured_problem(grid, 0.0);
    let sys = assemble(&spec).unwrap();
    (sys.matrix, grid, sys.rhs)
}

#[test]
fn c08_multigrid() {
    let t = Instant::now();
    let mut counts = Vec::new();
    for m in [17, 33, 65] {
        let (a, grid, b) = poisson(m);
        let h = Arc::new(MgHierarchy::new(&a, &grid, MgOptions::v(2, 2)).unwrap());
        let out = gmres(&a, &b, &MgPreconditioner::new(h), &SolveControl::default()).unwrap();
        assert!(out.report.converged);
        counts.push(out.report.iterations);
    }
    let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();

    // error contraction of V(2,2) Richardson on m = 33 against the direct solution
    let (a, grid, _) = poisson(33);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let b: Vec<Complex> = (0..a.nrows()).map(|_| Complex::new(rng.random::<f64>() - 0.5, 0.0)).collect();
    let exact = helmkit::linalg::BandLuFactorization::new(&a).unwrap().solve(&b).unwrap();
    let mg = MgPreconditioner::new(Arc::new(MgHierarchy::new(&a, &grid, MgOptions::v(2, 2)).unwrap()));
    let mut u = vec![Complex::new(0.0, 0.0); a.nrows()];
    let mut err = norm2(&exact);
    let mut worst = 0.0f64;
    for _ in 0..6 {
        let r = a.residual(&b, &u).unwrap();
        let c = mg.apply(&r);
        u.iter_mut().zip(&c).for_each(|(x, y)| *x += y);
        let e = norm2(&sub(&u, &exact));
        worst = worst.max(e / err);
        err = e;
        if err < 1e-13 * norm2(&exact) {
            break;
        }
    }
    let ok = spread <= 3 && worst <= 0.2 && t.elapsed() < Duration::from_secs(30);
    report(
        8,
        "multigrid",
        ok,
        format!("GMRES+V(2,2) iterations {counts:?}, worst contraction {worst:.3}"),
        t.elapsed(),
    );
}

fn kernel_cov(grid: &StructuredGrid, p: GrfParams) -> Vec<f64> {
    let n = grid.num_nodes();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (grid.coords(i), grid.coords(j));
            let d2: f64 = (0..grid.dim()).map(|d| (x[d] - y[d]).powi(2)).sum();
            c[i * n + j] = p.s * p.s * (-d2 / (2.0 * p.l * p.l)).exp();
        }
    }
    c
}

fn dense_cholesky(a: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        let d = a[j * n + j] + 1e-10 - (0..j).map(|k| l[j * n + k].powi(2)).sum::<f64>();
        l[j * n + j] = d.sqrt();
        for i in j + 1..n {
            let s = a[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            l[i * n + j] = s / l[j * n + j];
        }
    }
    l
}

fn empirical_cov(samples: &[Vec<f64>], mean: f64) -> Vec<f64> {
    let n = samples[0].len();
    let mut c = vec![0.0; n * n];
    for s in samples {
        for i in 0..n {
            for j in 0..n {
                c[i * n + j] += (s[i] - mean) * (s[j] - mean);
            }
        }
    }
    c.iter_mut().for_each(|v| *v /= samples.len() as f64);
    c
}

#[test]
fn c09_grf_statistics() {
    let t = Instant::now();
    let grid = StructuredGrid::new(2, 17).unwrap();
    // l is four grid steps so distance-l pairs sit on grid nodes
    let p = GrfParams::new(1.0, 0.5, 0.25);
    let sampler = GrfSampler::new(GrfSpec { grid, params: p, seed: 9, min_reject: None }).unwrap();
    let samples = sampler.sample_many(10_000);
    let n = grid.num_nodes();
    let (mut var, mut cov, mut pairs) = (0.0, 0.0, 0usize);
    for s in &samples {
        for i in 0..n {
            var += (s[i] - p.mean).powi(2);
            let ij = grid.multi_index(i);
            if ij[0] + 4 < 17 {
                cov += (s[i] - p.mean) * (s[i + 4] - p.mean);
                pairs += 1;
            }
        }
    }
    var /= (samples.len() * n) as f64;
    let corr = cov / pairs as f64 / var;
    let target = (-0.5f64).exp();
    let var_ok = (var / (p.s * p.s) - 1.0).abs() <= 0.1;
    let corr_ok = (corr / target - 1.0).abs() <= 0.1;

    // Kronecker sampler vs dense Cholesky of the full covariance on 5x5
    let small = StructuredGrid::new(2, 5).unwrap();
    let q = GrfParams::new(0.0, 1.0, 0.3);
    let kron = GrfSampler::new(GrfSpec { grid: small, params: q, seed: 10, min_reject: None })
        .unwrap()
        .sample_many(20_000);
    let nn = small.num_nodes();
    let l = dense_cholesky(&kernel_cov(&small, q), nn);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dense: Vec<Vec<f64>> = (0..20_000)
        .map(|_| {
            let z: Vec<f64> = (0..nn).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
            (0..nn).map(|i| (0..=i).map(|k| l[i * nn + k] * z[k]).sum()).collect()
        })
        .collect();
    let (ck, cd) = (empirical_cov(&kron, 0.0), empirical_cov(&dense, 0.0));
    let oracle_gap = ck.iter().zip(&cd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let kron_ok = oracle_gap <= 0.05 * q.s * q.s;
    let ok = var_ok && corr_ok && kron_ok && t.elapsed() < Duration::from_secs(60);
    report(
        9,
        "GRF statistics",
        ok,
        format!(
            "variance {var:.4} (target {:.4}), corr(l) {corr:.4} (target {target:.4}), Kronecker vs dense max cov gap {oracle_gap:.4}",
            p.s * p.s
        ),
        t.elapsed(),
    );
}

#[test]
fn c10_format_round_trips() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut c = Container::new(json!({"note": "acceptance"}));
    c.insert("w", Tensor::f32(vec![2, 3], vec![1.0, -0.5, 3.25, f32::MIN_POSITIVE, 0.0, 7.0]).unwrap())
        .unwrap();
    c.insert("x", Tensor::f64(vec![4], vec![1e-300, -2.0, f64::MAX, 0.1]).unwrap()).unwrap();
    let path = dir.path().join("c.bin");
    c.write(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let back = Container::read(&path).unwrap();
    let container_ok = back == c && back.to_bytes().unwrap() == bytes;

    let mut corrupt = bytes.clone();
    corrupt[0] ^= 0xff;
    let mut bad_len = bytes.clone();
    bad_len[8] = 0xff;
    bad_len[9] = 0xff;
    let rejected = Container::from_bytes(&corrupt).is_err()
        && Container::from_bytes(&bad_len).is_err()
        && Container::from_bytes(&bytes[..bytes.len() - 3]).is_err();

    let grid = StructuredGrid::new(3, 9).unwrap();
    let mask = mask_from_shapes(
        &grid,
        &[Shape::Sphere {
            center: vec![0.5, 0.5, 0.5],
            radius: 0.3,
        }],
    )
    .unwrap();
    let vpath = dir.path().join("m.vox");
    write_voxel_mask(&vpath, &grid, &mask).unwrap();
    let vbytes = std::fs::read(&vpath).unwrap();
    let mask_back = read_voxel_mask(&vpath, &grid).unwrap();
    let vpath2 = dir.path().join("m2.vox");
    write_voxel_mask(&vpath2, &grid, &mask_back).unwrap();
    let voxel_ok = mask_back == mask && std::fs::read(&vpath2).unwrap() == vbytes;
    let ok = container_ok && rejected && voxel_ok;
    report(
        10,
        "format round trips",
        ok,
        format!("container bitwise {container_ok}, corrupt headers rejected {rejected}, voxel bitwise {voxel_ok}"),
        t.elapsed(),
    );
}
