//! Reference solutions: dense global Galerkin solve, dense Schur
//! elimination, deterministic solves and Monte Carlo moments.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{assemble_global, assemble_global_load, FreeNodes, Problem};
use crate::linalg::{dense_select, norm2, CsrMatrix, DenseCholesky, SparseCholesky};
use crate::mesh::{BoxMesh, Classification};
use crate::pce::TripleProductTensor;
use crate::ssfem::{deterministic_load, StochasticBlockMatrix};

/// Largest system the dense oracles will factor.
pub const DENSE_CAP: usize = 30_000;

/// Undecomposed stochastic Galerkin system on the free dofs, block-major
/// with `free_node * components + c` inside a block.
#[derive(Debug)]
pub struct DenseReference {
    pub free: FreeNodes,
    pub components: usize,
    pub n_blocks: usize,
    pub load: Vec<f64>,
    pub solution: Vec<f64>,
    /// `‖A u − f‖ / ‖f‖`.
    pub residual: f64,
}

impl DenseReference {
    pub fn dim(&self) -> usize {
        self.solution.len()
    }

    /// Same layout as [`crate::schur::SchurContext::to_nodal`].
    pub fn to_nodal(&self, n_nodes: usize) -> Vec<Vec<f64>> {
        let nc = self.components;
        let per_block = self.free.len() * nc;
        (0..self.n_blocks)
            .map(|k| {
                let mut out = vec![0.0; n_nodes * nc];
                for (f, &node) in self.free.nodes().iter().enumerate() {
                    for c in 0..nc {
                        out[node * nc + c] = self.solution[k * per_block + f * nc + c];
                    }
                }
                out
            })
            .collect()
    }
}

fn global_operator(mesh: &BoxMesh, problem: &Problem, tensor: &TripleProductTensor, free: &FreeNodes) -> Result<CsrMatrix> {
    let modes = problem
        .coefficient()
        .coeffs
        .iter()
        .map(|field| assemble_global(mesh, problem, free, field))
        .collect::<Result<Vec<_>>>()?;
    Ok(StochasticBlockMatrix::new(modes, std::sync::Arc::new(tensor.clone()))?.assemble())
}

fn check_cap(dim: usize) -> Result<()> {
    if dim > DENSE_CAP {
        return Err(Error::DimensionCap { dim, cap: DENSE_CAP });
    }
    Ok(())
}

pub fn dense_solve(mesh: &BoxMesh, problem: &Problem, tensor: &TripleProductTensor) -> Result<DenseReference> {
    let free = FreeNodes::new(mesh);
    let nc = problem.components();
    let p = tensor.n_output();
    check_cap(free.len() * nc * p)?;
    let a = global_operator(mesh, problem, tensor, &free)?.to_dense();
    let load = deterministic_load(&assemble_global_load(mesh, problem, &free), p);
    let mut solution = load.clone();
    DenseCholesky::factor(&a, "dense global operator")?.solve_in_place(&mut solution);
    let mut res = load.clone();
    crate::linalg::dense_mul_add(&a, -1.0, &solution, &mut res);
    let fnorm = norm2(&load);
    let residual = if fnorm > 0.0 { norm2(&res) / fnorm } else { norm2(&res) };
    Ok(DenseReference { free, components: nc, n_blocks: p, load, solution, residual })
}

/// Interface matrix and right-hand side by dense elimination of every
/// interior dof, in the global interface ordering.
pub fn dense_schur(
    mesh: &BoxMesh,
    classes: &Classification,
    problem: &Problem,
    tensor: &TripleProductTensor,
) -> Result<(Mat<f64>, Vec<f64>)> {
    let free = FreeNodes::new(mesh);
    let nc = problem.components();
    let p = tensor.n_output();
    let per_block = free.len() * nc;
    check_cap(per_block * p)?;
    let a = global_operator(mesh, problem, tensor, &free)?.to_dense();
    let f = deterministic_load(&assemble_global_load(mesh, problem, &free), p);
    let iface = classes.interface();
    let ngd = iface.len() * nc;
    let mut gamma = vec![0; ngd * p];
    let mut interior = Vec::new();
    for k in 0..p {
        for (fi, &node) in free.nodes().iter().enumerate() {
            for c in 0..nc {
                let row = k * per_block + fi * nc + c;
                match iface.index_of(node) {
                    Some(slot) => gamma[k * ngd + slot * nc + c] = row,
                    None => interior.push(row),
                }
            }
        }
    }
    let aii = dense_select(&a, &interior, &interior);
    let aig = dense_select(&a, &interior, &gamma);
    let agg = dense_select(&a, &gamma, &gamma);
    let chol = DenseCholesky::factor(&aii, "dense interior block")?;
    let mut x = aig.clone();
    chol.solve_mat_in_place(&mut x);
    let s = agg - aig.transpose() * &x;
    let mut fi: Vec<f64> = interior.iter().map(|&r| f[r]).collect();
    chol.solve_in_place(&mut fi);
    let mut g: Vec<f64> = gamma.iter().map(|&r| f[r]).collect();
    crate::linalg::dense_tmul_add(&aig, -1.0, &fi, &mut g);
    Ok((s, g))
}

/// Per-element unit stiffness and dof lists for repeated global assembly.
struct ElementCache {
    units: Vec<Vec<f64>>,
    dofs: Vec<Vec<Option<usize>>>,
    n: usize,
}

impl ElementCache {
    fn new(mesh: &BoxMesh, problem: &Problem, free: &FreeNodes) -> Result<Self> {
        let nc = problem.components();
        let mut units = Vec::with_capacity(mesh.tets().len());
        let mut dofs = Vec::with_capacity(mesh.tets().len());
        for (e, tet) in mesh.tets().iter().enumerate() {
            units.push(problem.unit_element(&mesh.tet_coords(e))?);
            dofs.push((0..4 * nc).map(|a| free.index_of(tet[a / nc]).map(|f| f * nc + a % nc)).collect());
        }
        Ok(Self { units, dofs, n: free.len() * nc })
    }

    fn assemble(&self, mesh: &BoxMesh, nodal_coeff: &[f64]) -> CsrMatrix {
        let mut triplets = Vec::new();
        for (e, (ke, dofs)) in self.units.iter().zip(&self.dofs).enumerate() {
            let c = crate::fem::centroid_value(nodal_coeff, &mesh.tets()[e]);
            let ne = dofs.len();
            for (a, ra) in dofs.iter().enumerate() {
                let Some(r) = *ra else { continue };
                for (b, cb) in dofs.iter().enumerate() {
                    if let Some(col) = *cb {
                        triplets.push((r, col, c * ke[a * ne + b]));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.n, self.n, triplets)
    }
}

/// Deterministic FE solution for one nodal coefficient field, as a nodal
/// vector `node * components + c` with zeros on Dirichlet nodes.
pub fn deterministic_solve(mesh: &BoxMesh, problem: &Problem, nodal_coeff: &[f64]) -> Result<Vec<f64>> {
    let free = FreeNodes::new(mesh);
    let a = assemble_global(mesh, problem, &free, nodal_coeff)?;
    let mut u = assemble_global_load(mesh, problem, &free);
    SparseCholesky::factor(&a, "deterministic operator")?.solve_in_place(&mut u);
    Ok(scatter_free(&free, problem.components(), mesh.n_nodes(), &u))
}

fn scatter_free(free: &FreeNodes, nc: usize, n_nodes: usize, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n_nodes * nc];
    for (f, &node) in free.nodes().iter().enumerate() {
        out[node * nc..(node + 1) * nc].copy_from_slice(&u[f * nc..(f + 1) * nc]);
    }
    out
}

#[derive(Debug, Clone)]
pub struct McMoments {
    pub samples: usize,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

const MC_CHUNK: usize = 64;

/// Running mean and centred second moment, mergeable in a fixed order.
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(len: usize) -> Self {
        Self { n: 0.0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, q), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.n;
            *q += d * (v - *m);
        }
    }

    fn merge(&mut self, other: &Welford) {
        if other.n == 0.0 {
            return;
        }
        let n = self.n + other.n;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * other.n / n;
            self.m2[i] += other.m2[i] + d * d * self.n * other.n / n;
        }
        self.n = n;
    }
}

/// Monte Carlo mean and standard deviation of the nodal solution with the
/// coefficient `scale(x) · exp(Σ gᵢ(x) ξᵢ)` evaluated exactly per sample.
/// Sample `n` draws from stream `n` of a generator seeded by `seed`.
pub fn mc_moments(
    mesh: &BoxMesh,
    problem: &Problem,
    kle_modes: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<McMoments> {
    if samples < 2 {
        return Err(Error::Config(format!("Monte Carlo needs at least 2 samples, got {samples}")));
    }
    let free = FreeNodes::new(mesh);
    let nc = problem.components();
    let cache = ElementCache::new(mesh, problem, &free)?;
    let load = assemble_global_load(mesh, problem, &free);
    let scale = &problem.coefficient().scale;
    let n_chunks = samples.div_ceil(MC_CHUNK);
    let partials = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| -> Result<Welford> {
            let mut acc = Welford::new(load.len());
            for n in chunk * MC_CHUNK..((chunk + 1) * MC_CHUNK).min(samples) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(n as u64);
                let xi: Vec<f64> = kle_modes.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
                let coeff: Vec<f64> = (0..mesh.n_nodes())
                    .map(|x| scale[x] * kle_modes.iter().zip(&xi).map(|(g, z)| g[x] * z).sum::<f64>().exp())
                    .collect();
                let a = cache.assemble(mesh, &coeff);
                let mut u = load.clone();
                SparseCholesky::factor(&a, "Monte Carlo sample operator")?.solve_in_place(&mut u);
                acc.push(&u);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Welford::new(load.len());
    for p in &partials {
        total.merge(p);
    }
    let mean = total.mean;
    let sd: Vec<f64> = total.m2.iter().map(|m| (m / (samples as f64 - 1.0)).sqrt()).collect();
    Ok(McMoments {
        samples,
        mean: scatter_free(&free, nc, mesh.n_nodes(), &mean),
        sd: scatter_free(&free, nc, mesh.n_nodes(), &sd),
    })
}

/// `‖a − b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let nb = norm2(b);
    if nb > 0.0 { diff / nb } else { diff }
}
