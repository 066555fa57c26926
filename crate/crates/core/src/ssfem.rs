//! Stochastic Galerkin block operators `[A]_{jk} = Σ_i C_ijk Ā_i`.
//!
//! Stochastic vectors are block-major: entry `(k, d)` of a vector with
//! deterministic length `n` lives at `k * n + d`.

use std::io::Write;
use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::fem::ModeMatrices;
use crate::linalg::CsrMatrix;
use crate::pce::TripleProductTensor;

#[derive(Debug, Clone)]
pub struct StochasticBlockMatrix {
    modes: Vec<CsrMatrix>,
    tensor: Arc<TripleProductTensor>,
    nrows: usize,
    ncols: usize,
}

impl StochasticBlockMatrix {
    pub fn new(modes: Vec<CsrMatrix>, tensor: Arc<TripleProductTensor>) -> Result<Self> {
        if modes.len() != tensor.n_input() {
            return Err(Error::DimensionMismatch(format!(
                "{} mode matrices for a tensor over {} input terms",
                modes.len(),
                tensor.n_input()
            )));
        }
        let (nrows, ncols) = modes.first().map_or((0, 0), |a| (a.nrows(), a.ncols()));
        if modes.iter().any(|a| a.nrows() != nrows || a.ncols() != ncols) {
            return Err(Error::DimensionMismatch("mode matrices differ in shape".into()));
        }
        Ok(Self { modes, tensor, nrows, ncols })
    }

    pub fn n_blocks(&self) -> usize {
        self.tensor.n_output()
    }

    /// Deterministic block shape.
    pub fn block_shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    /// Full stochastic shape.
    pub fn shape(&self) -> (usize, usize) {
        (self.nrows * self.n_blocks(), self.ncols * self.n_blocks())
    }

    pub fn modes(&self) -> &[CsrMatrix] {
        &self.modes
    }

    pub fn tensor(&self) -> &TripleProductTensor {
        &self.tensor
    }

    /// `y += alpha · A x`, summing over `(i, j)` in ascending order per `k`.
    pub fn apply_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols * self.n_blocks());
        assert_eq!(y.len(), self.nrows * self.n_blocks());
        if self.nrows == 0 || self.ncols == 0 {
            return;
        }
        for (k, yk) in y.chunks_mut(self.nrows).enumerate() {
            for e in self.tensor.entries_for_k(k) {
                let xj = &x[e.j * self.ncols..(e.j + 1) * self.ncols];
                self.modes[e.i].mul_add(alpha * e.value, xj, yk);
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows * self.n_blocks()];
        self.apply_add(1.0, x, &mut y);
        y
    }

    /// Explicit sparse form: for each input mode `i`, then each nonzero
    /// `(j, k)`, scatter `C_ijk Ā_i` into block `(k, j)`.
    pub fn assemble(&self) -> CsrMatrix {
        let nnz: usize = self.modes.iter().map(CsrMatrix::nnz).max().unwrap_or(0) * self.tensor.nnz();
        let mut triplets = Vec::with_capacity(nnz);
        let mut order: Vec<_> = self.tensor.entries().to_vec();
        order.sort_by_key(|e| (e.i, e.j, e.k));
        for e in &order {
            let (r0, c0) = (e.k * self.nrows, e.j * self.ncols);
            for (r, c, v) in self.modes[e.i].triplets() {
                triplets.push((r0 + r, c0 + c, e.value * v));
            }
        }
        let (nr, nc) = self.shape();
        CsrMatrix::from_triplets(nr, nc, triplets)
    }

    /// Dense form, same entries as [`Self::assemble`].
    pub fn to_dense(&self) -> Mat<f64> {
        let (nr, nc) = self.shape();
        let mut d = Mat::zeros(nr, nc);
        for e in self.tensor.entries() {
            let (r0, c0) = (e.k * self.nrows, e.j * self.ncols);
            for (r, c, v) in self.modes[e.i].triplets() {
                d[(r0 + r, c0 + c)] += e.value * v;
            }
        }
        d
    }

    /// Writes the `(j, k)` block occupancy as a 0/1 matrix.
    pub fn write_occupancy_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for row in self.tensor.block_occupancy() {
            wr.write_record(row.iter().map(|&b| if b { "1" } else { "0" }))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Interior/interface split of one subdomain's stochastic operator.
#[derive(Debug, Clone)]
pub struct SplitBlocks {
    pub ii: StochasticBlockMatrix,
    pub ig: StochasticBlockMatrix,
    pub gi: StochasticBlockMatrix,
    pub gg: StochasticBlockMatrix,
}

/// Splits every mode matrix by the interior-then-interface local numbering.
pub fn split_interior_interface(
    modes: &ModeMatrices,
    tensor: Arc<TripleProductTensor>,
    n_subdomains: usize,
) -> Result<SplitBlocks> {
    let ni = modes.layout.n_interior_dofs();
    let n = modes.layout.n_dofs();
    if n_subdomains > 1 && ni == n {
        return Err(Error::EmptyInterface(modes.layout.subdomain));
    }
    let part = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| {
        let m = modes.modes.iter().map(|a| a.block(rows.clone(), cols.clone())).collect();
        StochasticBlockMatrix::new(m, tensor.clone())
    };
    Ok(SplitBlocks {
        ii: part(0..ni, 0..ni)?,
        ig: part(0..ni, ni..n)?,
        gi: part(ni..n, 0..ni)?,
        gg: part(ni..n, ni..n)?,
    })
}

/// Stochastic load with the deterministic source in block 0 (`⟨ψ₀⟩ = 1`).
pub fn deterministic_load(f: &[f64], n_blocks: usize) -> Vec<f64> {
    let mut out = vec![0.0; f.len() * n_blocks];
    out[..f.len()].copy_from_slice(f);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, SparseCholesky};
    use crate::pce::{triple_products, PcBasis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng, density: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for r in 0..n {
            for c in 0..=r {
                if r == c || rng.random_bool(density) {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    t.push((r, c, v));
                    if r != c {
                        t.push((c, r, v));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn operator(l: usize, p_a: u32, p_u: u32, n: usize, seed: u64) -> StochasticBlockMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensor = Arc::new(triple_products(&PcBasis::enumerate(l, p_a), &PcBasis::enumerate(l, p_u)).unwrap());
        let modes = (0..tensor.n_input()).map(|_| random_sym(n, &mut rng, 0.3)).collect();
        StochasticBlockMatrix::new(modes, tensor).unwrap()
    }

    #[test]
    fn explicit_matches_brute_force_sum() {
        let op = operator(2, 2, 2, 10, 1);
        let a = op.assemble().to_dense();
        let p = op.n_blocks();
        let n = 10;
        let basis = PcBasis::enumerate(2, 2);
        let dense_modes: Vec<_> = op.modes().iter().map(|m| m.to_dense()).collect();
        for j in 0..p {
            for k in 0..p {
                for r in 0..n {
                    for col in 0..n {
                        let want: f64 = (0..basis.len())
                            .map(|i| {
                                let c: f64 = basis
                                    .index(i)
                                    .exponents()
                                    .iter()
                                    .zip(basis.index(j).exponents())
                                    .zip(basis.index(k).exponents())
                                    .map(|((&a, &b), &c)| crate::pce::hermite_triple_moment(a, b, c))
                                    .product();
                                c * dense_modes[i][(r, col)]
                            })
                            .sum();
                        assert!((a[(k * n + r, j * n + col)] - want).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn matrix_free_matches_explicit() {
        let op = operator(3, 2, 2, 12, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_vec(op.shape().1, &mut rng);
        let y = op.apply(&x);
        let z = op.assemble().mul_vec(&x);
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(op.apply(&vec![0.0; x.len()]).iter().all(|&v| v == 0.0));
        assert_eq!(op.apply(&x), y, "bit-identical reruns");
        let (d, e) = (op.to_dense(), op.assemble().to_dense());
        assert!((&d - &e).norm_max() < 1e-14);
    }

    #[test]
    fn operator_is_symmetric() {
        let op = operator(2, 2, 3, 8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_vec(op.shape().1, &mut rng);
        let y = random_vec(op.shape().1, &mut rng);
        assert!((dot(&op.apply(&x), &y) - dot(&x, &op.apply(&y))).abs() < 1e-10);
        assert!(op.assemble().is_symmetric(1e-14));
    }

    #[test]
    fn mode_zero_only_is_block_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tensor = Arc::new(triple_products(&PcBasis::enumerate(2, 0), &PcBasis::enumerate(2, 2)).unwrap());
        let a0 = random_sym(6, &mut rng, 0.5);
        let op = StochasticBlockMatrix::new(vec![a0.clone()], tensor.clone()).unwrap();
        let x = random_vec(op.shape().1, &mut rng);
        let y = op.apply(&x);
        for k in 0..op.n_blocks() {
            let want = a0.mul_vec(&x[k * 6..(k + 1) * 6]);
            for d in 0..6 {
                assert!((y[k * 6 + d] - tensor.norms()[k] * want[d]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn order_zero_is_single_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let tensor = Arc::new(triple_products(&PcBasis::enumerate(3, 0), &PcBasis::enumerate(3, 0)).unwrap());
        let a0 = random_sym(5, &mut rng, 0.5);
        let op = StochasticBlockMatrix::new(vec![a0.clone()], tensor).unwrap();
        assert_eq!(op.assemble(), a0);
    }

    #[test]
    fn block_sparsity_follows_tensor() {
        let op = operator(3, 1, 2, 4, 7);
        let a = op.assemble();
        let occ = op.tensor().block_occupancy();
        let p = op.n_blocks();
        let mut seen = vec![vec![false; p]; p];
        for (r, c, _) in a.triplets() {
            seen[r / 4][c / 4] = true;
        }
        for j in 0..p {
            for k in 0..p {
                assert_eq!(seen[k][j], occ[j][k], "block ({j}, {k})");
            }
        }
        assert!(occ.iter().flatten().any(|&b| !b), "order-1 input leaves blocks empty");
        let mut buf = Vec::new();
        op.write_occupancy_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), p);
    }

    #[test]
    fn mismatched_tensor_rejected() {
        let tensor = Arc::new(triple_products(&PcBasis::enumerate(2, 1), &PcBasis::enumerate(2, 1)).unwrap());
        assert!(StochasticBlockMatrix::new(vec![CsrMatrix::zeros(3, 3)], tensor).is_err());
    }

    mod mesh_backed {
        use super::*;
        use crate::fem::{assemble_modes, DiffusionProblem, Problem};
        use crate::klexp::{assemble_covariance, solve_kle, CovarianceKernel};
        use crate::mesh::{BoxMesh, Classification, DirichletFaces, Partition};
        use crate::pce::project_lognormal;

        fn setup(grid: [usize; 3]) -> (BoxMesh, Partition, Classification, Problem, Arc<TripleProductTensor>) {
            let mesh = BoxMesh::build([4, 4, 4], [1.0, 1.0, 1.0], DirichletFaces::All).unwrap();
            let kernel = CovarianceKernel::new(0.3, 1.0, 1.0, 1.0).unwrap();
            let kle = solve_kle(&assemble_covariance(mesh.nodes(), &kernel), &mesh.lumped_volumes(), 2).unwrap();
            let input = PcBasis::enumerate(2, 2);
            let coefficient = project_lognormal(&vec![0.0; mesh.n_nodes()], &kle.modes, &input).unwrap();
            let tensor = Arc::new(triple_products(&input, &PcBasis::enumerate(2, 2)).unwrap());
            let part = Partition::boxes(&mesh, grid).unwrap();
            let classes = Classification::classify(&mesh, &part);
            let problem = Problem::Diffusion(DiffusionProblem { forcing: 1.0, coefficient });
            (mesh, part, classes, problem, tensor)
        }

        #[test]
        fn full_subdomain_operator_is_spd() {
            let (mesh, part, classes, problem, tensor) = setup([1, 1, 1]);
            let modes = assemble_modes(&mesh, &part, &classes, 0, &problem).unwrap();
            let op = StochasticBlockMatrix::new(modes.modes.clone(), tensor).unwrap();
            assert!(SparseCholesky::factor(&op.assemble(), "full operator").is_ok());
        }

        #[test]
        fn single_subdomain_has_no_interface() {
            let (mesh, part, classes, problem, tensor) = setup([1, 1, 1]);
            let modes = assemble_modes(&mesh, &part, &classes, 0, &problem).unwrap();
            let split = split_interior_interface(&modes, tensor, 1).unwrap();
            assert_eq!(split.ig.shape().1, 0);
            assert_eq!(split.gg.shape(), (0, 0));
        }

        #[test]
        fn split_reassembles_unsplit_operator() {
            let (mesh, part, classes, problem, tensor) = setup([2, 2, 1]);
            let modes = assemble_modes(&mesh, &part, &classes, 3, &problem).unwrap();
            let full = StochasticBlockMatrix::new(modes.modes.clone(), tensor.clone()).unwrap();
            let split = split_interior_interface(&modes, tensor, 4).unwrap();
            let (ni, ng) = (modes.layout.n_interior_dofs(), modes.layout.n_interface_dofs());
            let n = ni + ng;
            let p = full.n_blocks();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let x = random_vec(n * p, &mut rng);
            let xi: Vec<f64> = (0..p).flat_map(|k| x[k * n..k * n + ni].to_vec()).collect();
            let xg: Vec<f64> = (0..p).flat_map(|k| x[k * n + ni..(k + 1) * n].to_vec()).collect();
            let mut yi = split.ii.apply(&xi);
            split.ig.apply_add(1.0, &xg, &mut yi);
            let mut yg = split.gg.apply(&xg);
            split.gi.apply_add(1.0, &xi, &mut yg);
            let y = full.apply(&x);
            for k in 0..p {
                for d in 0..ni {
                    assert!((y[k * n + d] - yi[k * ni + d]).abs() < 1e-12);
                }
                for d in 0..ng {
                    assert!((y[k * n + ni + d] - yg[k * ng + d]).abs() < 1e-12);
                }
            }
            // Interface-only action against dense extraction.
            let dense = full.assemble().to_dense();
            let yg_only = split.gg.apply(&xg);
            for k in 0..p {
                for d in 0..ng {
                    let want: f64 = (0..p)
                        .flat_map(|j| (0..ng).map(move |c| (j, c)))
                        .map(|(j, c)| dense[(k * n + ni + d, j * n + ni + c)] * xg[j * ng + c])
                        .sum();
                    assert!((yg_only[k * ng + d] - want).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn deterministic_load_fills_block_zero() {
            let f = deterministic_load(&[1.0, 2.0], 3);
            assert_eq!(f, vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        }
    }
}
