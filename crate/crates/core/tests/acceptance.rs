//! End-to-end acceptance checks. Each test prints one
//! `criterion N: PASS|FAIL ...` line before asserting.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssdd::cli::{compute_moments, Pipeline, ProblemKind, RunConfig};
use ssdd::klexp::{assemble_covariance, solve_kle, CovarianceKernel};
use ssdd::mesh::{BoxMesh, DirichletFaces, NodeClass};
use ssdd::oracle::{dense_solve, deterministic_solve, mc_moments, relative_l2};
use ssdd::pce::{triple_products, PcBasis};
use ssdd::precond::{scaling, PreconditionerKind, TwoLevelPreconditioner};

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn config(problem: ProblemKind, cells: [usize; 3], partition: [usize; 3], l: usize, p_u: u32) -> RunConfig {
    let mut c = RunConfig::defaults_for(problem);
    c.cells = cells;
    c.partition = partition;
    c.l = l;
    c.p_u = p_u;
    c.p_a = c.p_a.min(p_u);
    c.output = None;
    c
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn median(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[v.len() / 2]
}

#[test]
fn criterion_1_oracle_equivalence() {
    let partitions = [[2, 1, 1], [2, 2, 1], [2, 2, 2]];
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut cases = 0;
    for problem in [ProblemKind::Poisson, ProblemKind::Elasticity] {
        for l in [2, 3] {
            for p_u in [2, 3] {
                let mut reference = None;
                for partition in partitions {
                    let mut cfg = config(problem, [4, 4, 4], partition, l, p_u);
                    cfg.tol = 1e-8;
                    let p = Pipeline::prepare(cfg).unwrap();
                    let dense = reference.get_or_insert_with(|| {
                        dense_solve(&p.mesh, &p.problem, &p.tensor).unwrap().to_nodal(p.mesh.n_nodes()).concat()
                    });
                    let sol = p.solve(PreconditionerKind::Wirebasket, p.config.pcg_options()).unwrap();
                    let err = relative_l2(&sol.nodal.concat(), dense);
                    worst = worst.max(err);
                    cases += 1;
                    if !(sol.report.converged && err <= 1e-8) {
                        failures.push(format!("{problem} {partition:?} L={l} p_u={p_u}: {err:.2e}"));
                    }
                }
            }
        }
    }
    let pass = failures.is_empty();
    verdict(1, pass, &format!("{cases} cases, worst relative L2 error {worst:.2e} {failures:?}"));
    assert!(pass);
}

#[test]
fn criterion_2_preconditioner_ordering() {
    let mut counts = [Vec::new(), Vec::new(), Vec::new()];
    for seed in [11, 12, 13] {
        let mut cfg = config(ProblemKind::Elasticity, [6, 6, 6], [2, 2, 2], 3, 3);
        cfg.seed = Some(seed);
        cfg.tol = 1e-5;
        cfg.maxit = 1000;
        let p = Pipeline::prepare(cfg).unwrap();
        for (slot, kind) in PreconditionerKind::ALL.into_iter().enumerate() {
            let sol = p.solve(kind, p.config.pcg_options()).unwrap();
            // Non-convergence counts as one past the cap.
            let n = if sol.report.converged { sol.report.iterations } else { p.config.maxit + 1 };
            counts[slot].push(n);
        }
    }
    let [nocoarse, vertex, wirebasket] = counts.clone().map(median);
    let pass = wirebasket <= vertex && vertex <= nocoarse && wirebasket < nocoarse;
    verdict(
        2,
        pass,
        &format!("median iterations wirebasket {wirebasket}, vertex {vertex}, nocoarse {nocoarse} (all {counts:?})"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_stochastic_scalability() {
    let mut iters = Vec::new();
    let mut terms = Vec::new();
    for (l, p_u) in [(2, 3), (3, 3), (5, 3)] {
        let cfg = config(ProblemKind::Poisson, [6, 6, 6], [2, 2, 2], l, p_u);
        let p = Pipeline::prepare(cfg).unwrap();
        let sol = p.solve(PreconditionerKind::Wirebasket, p.config.pcg_options()).unwrap();
        assert!(sol.report.converged);
        terms.push(p.output_basis.len());
        iters.push(sol.report.iterations);
    }
    let (lo, hi) = (*iters.iter().min().unwrap(), *iters.iter().max().unwrap());
    let ratio = hi as f64 / lo as f64;
    let pass = terms == [10, 20, 56] && ratio <= 1.5;
    verdict(3, pass, &format!("P_u {terms:?} -> iterations {iters:?}, ratio {ratio:.3}"));
    assert!(pass);
}

#[test]
fn criterion_4_deterministic_limit() {
    let mut details = Vec::new();
    let mut pass = true;
    for problem in [ProblemKind::Poisson, ProblemKind::Elasticity] {
        let mut cfg = config(problem, [4, 4, 4], [2, 2, 2], 3, 3);
        cfg.sigma = 0.0;
        cfg.tol = 1e-13;
        let p = Pipeline::prepare(cfg).unwrap();
        let sol = p.solve(PreconditionerKind::Wirebasket, p.config.pcg_options()).unwrap();
        let det = deterministic_solve(&p.mesh, &p.problem, p.problem.coefficient().mean()).unwrap();
        let err = relative_l2(&sol.nodal[0], &det);
        let scale = det.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let higher = sol.nodal[1..].iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
        let ok = sol.report.converged && err <= 1e-10 && higher <= 1e-10;
        pass &= ok;
        details.push(format!("{problem}: block 0 error {err:.2e}, higher blocks {higher:.2e}, {} iterations", sol.report.iterations));
    }
    verdict(4, pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_5_moments_against_monte_carlo() {
    let mut cfg = config(ProblemKind::Poisson, [6, 6, 6], [2, 2, 2], 3, 3);
    cfg.sigma = 0.3;
    cfg.tol = 1e-10;
    let p = Pipeline::prepare(cfg).unwrap();
    let sol = p.solve(PreconditionerKind::Wirebasket, p.config.pcg_options()).unwrap();
    let m = compute_moments(&sol.nodal, p.tensor.norms(), 1);
    let mc = mc_moments(&p.mesh, &p.problem, &p.kle.modes, 10_000, 2024).unwrap();
    let mean_err = relative_l2(&m.mean, &mc.mean);
    let sd_err = relative_l2(&m.sd, &mc.sd);

    let n = p.mesh.cells()[0];
    let free: Vec<usize> = (0..p.mesh.n_nodes()).filter(|&k| !p.mesh.dirichlet_mask()[k]).collect();
    let cov = |k: usize| m.sd[k] / m.mean[k];
    let positive = free.iter().all(|&k| cov(k) > 0.0);
    let central = |k: usize| p.mesh.nodes()[k].iter().all(|&x| (0.25..=0.75).contains(&x));
    let layer = |k: usize| p.mesh.grid_index(k).iter().any(|&g| g == 1 || g == n - 1);
    let average = |f: &dyn Fn(usize) -> bool| {
        let v: Vec<f64> = free.iter().copied().filter(|&k| f(k)).map(cov).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (cov_central, cov_layer) = (average(&central), average(&layer));
    let argmax = *free.iter().max_by(|&&a, &&b| cov(a).total_cmp(&cov(b))).unwrap();
    let pass = mean_err <= 0.03 && sd_err <= 0.08 && positive && cov_central > cov_layer;
    verdict(
        5,
        pass,
        &format!(
            "mean error {mean_err:.4}, SD error {sd_err:.4}, CoV positive {positive}, mean CoV central {cov_central:.4} vs boundary layer {cov_layer:.4}, max CoV {:.4} at {:?}",
            cov(argmax),
            p.mesh.nodes()[argmax]
        ),
    );
    assert!(pass);
}

/// Face-averaged `u_y` on each `x = const` plane.
fn section_profile(mesh: &BoxMesh, field: &[f64]) -> Vec<f64> {
    let [nx, ny, nz] = mesh.cells();
    (0..=nx)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..=ny {
                for k in 0..=nz {
                    s += field[mesh.node_at(i, j, k)];
                }
            }
            s / ((ny + 1) * (nz + 1)) as f64
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn criterion_6_beam() {
    let beam = |sigma: f64| {
        let mut cfg = config(ProblemKind::Elasticity, [30, 6, 6], [3, 1, 1], 2, 2);
        cfg.sigma = sigma;
        let p = Pipeline::prepare(cfg).unwrap();
        let sol = p.solve(PreconditionerKind::Wirebasket, p.config.pcg_options()).unwrap();
        assert!(sol.report.converged);
        (ssdd::cli::run::tip_summary(&p, &sol).unwrap(), compute_moments(&sol.nodal, p.tensor.norms(), 3), p)
    };
    let (tip0, _, p0) = beam(0.0);
    let reference = p0.config.beam.euler_bernoulli_tip(p0.config.beam.e0);
    let rel = (tip0.mean_deflection - reference).abs() / reference;

    let (tip, m, p) = beam(0.3);
    let mean_profile = section_profile(&p.mesh, &m.mean_magnitude());
    let sd_profile = section_profile(&p.mesh, &m.sd_magnitude());
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0]);
    let corr = pearson(&m.mean_magnitude(), &m.sd_magnitude());
    let trend = increasing(&mean_profile) && increasing(&sd_profile) && corr >= 0.9;
    let pass = rel <= 0.15 && tip.sd_deflection > 0.0 && trend;
    verdict(
        6,
        pass,
        &format!(
            "tip {:.4} vs Euler-Bernoulli {reference:.4} ({:.1}% off); sigma 0.3 tip {:.4} +- {:.4}, profiles increasing {}, magnitude correlation {corr:.3}",
            tip0.mean_deflection,
            100.0 * rel,
            tip.mean_deflection,
            tip.sd_deflection,
            increasing(&mean_profile) && increasing(&sd_profile)
        ),
    );
    assert!(pass);
}

/// Gauss–Hermite nodes and weights for the standard normal density.
fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let j = Mat::from_fn(n, n, |a, b| if a.abs_diff(b) == 1 { (a.max(b) as f64).sqrt() } else { 0.0 });
    let evd = j.self_adjoint_eigen(Side::Lower).unwrap();
    (0..n).map(|i| (evd.S()[i], evd.U()[(0, i)].powi(2))).collect()
}

fn he(n: u32, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        (a, b) = (b, x * b - k as f64 * a);
    }
    b
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn criterion_7_invariants() {
    let mut checks: Vec<(String, bool)> = Vec::new();

    let (input, output) = (PcBasis::enumerate(3, 2), PcBasis::enumerate(3, 3));
    let tensor = triple_products(&input, &output).unwrap();
    let rule = gauss_hermite(8);
    let mut tp_err: f64 = 0.0;
    for i in 0..input.len() {
        for j in 0..output.len() {
            for k in 0..output.len() {
                let mut q = 1.0;
                for d in 0..3 {
                    let e = |b: &PcBasis, t: usize| b.index(t).exponents()[d];
                    q *= rule
                        .iter()
                        .map(|&(x, w)| w * he(e(&input, i), x) * he(e(&output, j), x) * he(e(&output, k), x))
                        .sum::<f64>();
                }
                tp_err = tp_err.max((tensor.get(i, j, k).unwrap_or(0.0) - q).abs());
            }
        }
    }
    checks.push((format!("triple products vs quadrature {tp_err:.1e}"), tp_err <= 1e-10));

    let mut cfg = config(ProblemKind::Elasticity, [4, 4, 4], [2, 2, 1], 2, 2);
    cfg.extents = [1.0, 1.0, 1.0];
    let p = Pipeline::prepare(cfg).unwrap();
    let mut pou: f64 = 0.0;
    let mut ones = vec![0.0; p.ctx.dim()];
    for (s, sub) in p.ctx.subdomains.iter().enumerate() {
        sub.restriction.scatter_add(&scaling(&p.ctx, &p.partition, s), &mut ones);
    }
    for v in &ones {
        pou = pou.max((v - 1.0).abs());
    }
    checks.push((format!("partition of unity {pou:.1e}"), pou == 0.0 || pou <= 1e-15));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (x, y) = (random_vec(p.ctx.dim(), &mut rng), random_vec(p.ctx.dim(), &mut rng));
    let (sx, sy) = (p.ctx.apply(&x), p.ctx.apply(&y));
    let op_asym = (dot(&sx, &y) - dot(&x, &sy)).abs() / dot(&sx, &x).abs();
    checks.push((format!("operator symmetry {op_asym:.1e}"), op_asym <= 1e-9));
    let (schur, _) = p.local_schur();
    for kind in PreconditionerKind::ALL {
        let m = TwoLevelPreconditioner::build(&p.ctx, &p.classes, &p.partition, kind, schur).unwrap();
        let (mx, my) = (m.apply(&x), m.apply(&y));
        let asym = (dot(&mx, &y) - dot(&x, &my)).abs() / dot(&mx, &x).abs();
        checks.push((format!("{kind} preconditioner symmetry {asym:.1e}"), asym <= 1e-9 && dot(&mx, &x) > 0.0));
    }

    let mesh = BoxMesh::build([4, 4, 4], [1.0, 1.0, 1.0], DirichletFaces::All).unwrap();
    let kernel = CovarianceKernel::new(0.3, 1.0, 1.0, 1.0).unwrap();
    let kle = solve_kle(&assemble_covariance(mesh.nodes(), &kernel), &mesh.lumped_volumes(), 20).unwrap();
    let monotone = kle.eigenvalues.windows(2).all(|w| w[0] >= w[1]) && kle.eigenvalues[19] >= 0.0;
    checks.push(("KLE eigenvalues non-increasing".into(), monotone));

    let n = 200;
    let bar = BoxMesh::build([n, 1, 1], [1.0, 1.0, 1.0], DirichletFaces::None).unwrap();
    let kernel = CovarianceKernel::new(1.0, 1.0, f64::INFINITY, f64::INFINITY).unwrap();
    let kle = solve_kle(&assemble_covariance(bar.nodes(), &kernel), &bar.lumped_volumes(), 4).unwrap();
    let exact = exponential_eigenvalues_1d(1.0, 4);
    let kle_err = kle.eigenvalues.iter().zip(&exact).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    checks.push((format!("KLE vs 1D analytic {kle_err:.1e}"), kle_err <= 1e-3));

    let sub = &p.ctx.subdomains[0];
    let tensor = p.tensor.clone();
    let mut alg_err: f64 = 0.0;
    for block in [&sub.blocks.gg, &sub.blocks.ii, &sub.blocks.ig] {
        let explicit = block.assemble().to_dense();
        let (nr, nc) = block.block_shape();
        let dense_modes: Vec<Mat<f64>> = block.modes().iter().map(|m| m.to_dense()).collect();
        for k in 0..block.n_blocks() {
            for j in 0..block.n_blocks() {
                for r in 0..nr {
                    for c in 0..nc {
                        let want: f64 = (0..tensor.n_input())
                            .map(|i| tensor.get(i, j, k).unwrap_or(0.0) * dense_modes[i][(r, c)])
                            .sum();
                        alg_err = alg_err.max((explicit[(k * nr + r, j * nc + c)] - want).abs());
                    }
                }
            }
        }
    }
    checks.push((format!("explicit assembly vs dense sum {alg_err:.1e}"), alg_err <= 1e-12));

    let c = &p.classes;
    let classes_ok = c.interface().len() == c.faces().len() + c.wirebasket().len()
        && c.vertices().nodes().iter().all(|&n| c.wirebasket().index_of(n).is_some())
        && c.interface().nodes().iter().all(|&n| p.partition.multiplicity(n) >= 2)
        && (0..p.mesh.n_nodes()).all(|n| match c.class(n) {
            NodeClass::Face => p.partition.multiplicity(n) == 2,
            NodeClass::Interior(_) => p.partition.multiplicity(n) == 1,
            _ => true,
        });
    checks.push(("node class taxonomy".into(), classes_ok));

    let pass = checks.iter().all(|(_, ok)| *ok);
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(s, _)| s.as_str()).collect();
    let all: Vec<&str> = checks.iter().map(|(s, _)| s.as_str()).collect();
    verdict(7, pass, &format!("{} checks: {} {:?}", checks.len(), all.join(", "), failed));
    assert!(pass);
}

fn exponential_eigenvalues_1d(b: f64, count: usize) -> Vec<f64> {
    let a = 0.5;
    let c = 1.0 / b;
    let bisect = |f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo).signum() == f(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let eps = 1e-12;
    let pi = std::f64::consts::PI;
    let mut out = Vec::new();
    for k in 0..count {
        let kpi = k as f64 * pi;
        let even = bisect(&|w| c - w * (w * a).tan(), (kpi + eps) / a, (kpi + 0.5 * pi - eps) / a);
        let odd = bisect(&|w| w + c * (w * a).tan(), (kpi + 0.5 * pi + eps) / a, (kpi + pi - eps) / a);
        out.push(2.0 * c / (even * even + c * c));
        out.push(2.0 * c / (odd * odd + c * c));
    }
    out.sort_by(|x, y| y.total_cmp(x));
    out.truncate(count);
    out
}
