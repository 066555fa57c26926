//! Karhunen–Loève expansion of the separable exponential covariance on
//! mesh nodes, discretized by Nyström with lumped nodal weights.

use std::io::Write;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceKernel {
    pub sigma: f64,
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl CovarianceKernel {
    pub fn new(sigma: f64, bx: f64, by: f64, bz: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !(bx > 0.0 && by > 0.0 && bz > 0.0) {
            return Err(Error::Config(format!(
                "covariance needs sigma >= 0 and positive correlation lengths, got sigma={sigma}, b=({bx}, {by}, {bz})"
            )));
        }
        Ok(Self { sigma, bx, by, bz })
    }

    pub fn eval(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        self.sigma
            * self.sigma
            * (-(a[0] - b[0]).abs() / self.bx - (a[1] - b[1]).abs() / self.by - (a[2] - b[2]).abs() / self.bz).exp()
    }
}

pub fn assemble_covariance(nodes: &[[f64; 3]], kernel: &CovarianceKernel) -> Mat<f64> {
    let n = nodes.len();
    let mut c = Mat::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = kernel.eval(&nodes[i], &nodes[j]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlExpansion {
    /// Leading eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// `√λᵢ φᵢ` per retained mode, one value per node.
    pub modes: Vec<Vec<f64>>,
    /// Trace of the weighted covariance, `σ² · volume` for lumped weights.
    pub total_variance: f64,
}

impl KlExpansion {
    /// Expansion of a zero-variance field: `l` identically zero modes.
    pub fn zero(n_nodes: usize, l: usize) -> Self {
        Self {
            eigenvalues: vec![0.0; l],
            modes: vec![vec![0.0; n_nodes]; l],
            total_variance: 0.0,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Cumulative `Σ_{i≤n} λᵢ / total_variance`.
    pub fn relative_energy(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.eigenvalues
            .iter()
            .map(|&l| {
                acc += l;
                if self.total_variance > 0.0 {
                    acc / self.total_variance
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Flips the sign of each mode with probability ½.
    pub fn with_random_signs(mut self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in &mut self.modes {
            if rng.random_bool(0.5) {
                m.iter_mut().for_each(|v| *v = -*v);
            }
        }
        self
    }

    /// Writes `index,eigenvalue,relative_energy` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["index", "eigenvalue", "relative_energy"])?;
        for (i, (l, e)) in self.eigenvalues.iter().zip(self.relative_energy()).enumerate() {
            wr.write_record(&[(i + 1).to_string(), format!("{l:e}"), format!("{e:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Eigenvalues of `W^{1/2} C W^{1/2}` in non-increasing order.
pub fn weighted_spectrum(c: &Mat<f64>, weights: &[f64]) -> Result<Vec<f64>> {
    let b = weighted(c, weights)?;
    let mut ev = b
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    ev.reverse();
    Ok(ev)
}

fn weighted(c: &Mat<f64>, weights: &[f64]) -> Result<Mat<f64>> {
    let n = c.nrows();
    if c.ncols() != n || weights.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "covariance {}x{} with {} weights",
            c.nrows(),
            c.ncols(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|&&w| !(w > 0.0)) {
        return Err(Error::Config(format!("quadrature weights must be positive, found {w}")));
    }
    let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    Ok(Mat::from_fn(n, n, |i, j| sq[i] * c[(i, j)] * sq[j]))
}

/// Leading `l` Karhunen–Loève pairs of `C` under nodal weights `W`.
pub fn solve_kle(c: &Mat<f64>, weights: &[f64], l: usize) -> Result<KlExpansion> {
    let n = c.nrows();
    if l > n {
        return Err(Error::Config(format!("{l} KLE modes requested on {n} nodes")));
    }
    let b = weighted(c, weights)?;
    let total_variance: f64 = (0..n).map(|i| b[(i, i)]).sum();
    if l == 0 {
        return Ok(KlExpansion {
            eigenvalues: Vec::new(),
            modes: Vec::new(),
            total_variance,
        });
    }
    let evd = b.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let (s, u) = (evd.S(), evd.U());
    let leading = s[n - 1];
    if !(leading > 0.0) {
        return Err(Error::NonPositiveEigenvalue(leading));
    }
    let mut eigenvalues = Vec::with_capacity(l);
    let mut modes = Vec::with_capacity(l);
    for r in 0..l {
        let col = n - 1 - r;
        let lambda = s[col].max(0.0);
        let mut phi: Vec<f64> = (0..n).map(|i| u[(i, col)] / weights[i].sqrt()).collect();
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = phi.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        let scale = lambda.sqrt();
        modes.push(phi.into_iter().map(|v| v * scale).collect());
        eigenvalues.push(lambda);
    }
    Ok(KlExpansion {
        eigenvalues,
        modes,
        total_variance,
    })
}
