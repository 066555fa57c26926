//! Preconditioned conjugate gradients with successive-update stopping and a
//! Lanczos condition estimate.

use std::time::Instant;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcgOptions {
    pub tol: f64,
    pub maxit: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self { tol: 1e-5, maxit: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// `‖u_{i+1} − u_i‖ / ‖u_i‖` per iteration (absolute when `u_i = 0`).
    pub relative_updates: Vec<f64>,
    /// `‖r_i‖`, starting with the initial residual.
    pub residual_norms: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub condition_estimate: Option<f64>,
    pub wall_time_s: f64,
    pub initial_guess: String,
}

/// Residual below this fraction of the initial one counts as exact.
const RESIDUAL_FLOOR: f64 = 1e-14;

/// Solves `S u = g` given the actions of `S` and `M⁻¹`.
pub fn pcgm(
    operator: &dyn Fn(&[f64]) -> Vec<f64>,
    preconditioner: &dyn Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    u0: &[f64],
    opts: PcgOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if u0.len() != rhs.len() {
        return Err(Error::DimensionMismatch(format!(
            "initial guess of length {} for a system of size {}",
            u0.len(),
            rhs.len()
        )));
    }
    let start = Instant::now();
    let mut u = u0.to_vec();
    let su = operator(&u);
    let mut r: Vec<f64> = rhs.iter().zip(&su).map(|(g, s)| g - s).collect();
    let r0 = norm2(&r);
    let mut report = SolveReport {
        iterations: 0,
        converged: false,
        relative_updates: Vec::new(),
        residual_norms: vec![r0],
        alphas: Vec::new(),
        betas: Vec::new(),
        condition_estimate: None,
        wall_time_s: 0.0,
        initial_guess: if u0.iter().all(|&v| v == 0.0) { "zero".into() } else { "given".into() },
    };
    let finish = |mut report: SolveReport, u: Vec<f64>| {
        report.condition_estimate = condition_estimate(&report.alphas, &report.betas);
        report.wall_time_s = start.elapsed().as_secs_f64();
        (u, report)
    };
    if opts.maxit == 0 {
        return Ok(finish(report, u));
    }
    if r0 == 0.0 {
        report.converged = true;
        return Ok(finish(report, u));
    }
    let mut z = preconditioner(&r);
    let mut p = z.clone();
    let mut delta = dot(&r, &z);
    if !(delta > 0.0) {
        return Err(Error::NonSpdPreconditioner(delta));
    }
    for i in 0..opts.maxit {
        let q = operator(&p);
        let gamma = dot(&q, &p);
        if !(gamma > 0.0) {
            return Err(Error::NonSpdOperator(gamma));
        }
        let alpha = delta / gamma;
        let u_norm = norm2(&u);
        for (ui, pi) in u.iter_mut().zip(&p) {
            *ui += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        let step = alpha.abs() * norm2(&p);
        let rel = if u_norm > 0.0 { step / u_norm } else { step };
        let rn = norm2(&r);
        report.alphas.push(alpha);
        report.relative_updates.push(rel);
        report.residual_norms.push(rn);
        report.iterations = i + 1;
        if rel <= opts.tol || rn <= RESIDUAL_FLOOR * r0 {
            report.converged = true;
            break;
        }
        z = preconditioner(&r);
        let delta_next = dot(&r, &z);
        if !(delta_next > 0.0) {
            return Err(Error::NonSpdPreconditioner(delta_next));
        }
        let beta = delta_next / delta;
        report.betas.push(beta);
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        delta = delta_next;
    }
    Ok(finish(report, u))
}

/// Extreme eigenvalue ratio of the Lanczos tridiagonal rebuilt from the CG
/// step lengths `α` and direction updates `β`; `None` below two steps.
pub fn condition_estimate(alphas: &[f64], betas: &[f64]) -> Option<f64> {
    let m = alphas.len().min(betas.len() + 1);
    if m < 2 {
        return None;
    }
    let mut t = Mat::<f64>::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < m {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let ev = t.self_adjoint_eigenvalues(Side::Lower).ok()?;
    let (lo, hi) = (ev[0], ev[m - 1]);
    if !(lo > 0.0) {
        return None;
    }
    Some((hi / lo).max(1.0))
}
