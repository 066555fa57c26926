//! Linear tetrahedral element kernels and per-chaos-mode assembly for
//! stochastic diffusion and linear elasticity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{signed_volume, BoxMesh, Classification, Partition, SubdomainLayout};
use crate::pce::LognormalPce;

/// `-∇·(c ∇u) = F` with a lognormal diffusion coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionProblem {
    pub forcing: f64,
    pub coefficient: LognormalPce,
}

/// Isotropic linear elasticity with lognormal Young's modulus and
/// self-weight `F = (0, -ρg, 0)`; traction-free away from Dirichlet faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticityProblem {
    pub nu: f64,
    pub rho: f64,
    pub gravity: f64,
    pub youngs_modulus: LognormalPce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Problem {
    Diffusion(DiffusionProblem),
    Elasticity(ElasticityProblem),
}

/// Lamé parameters `(λ, μ)` from Young's modulus and Poisson ratio.
pub fn lame_from_youngs(e: f64, nu: f64) -> (f64, f64) {
    (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
}

/// `(E, ν)` from Lamé parameters.
pub fn youngs_from_lame(lambda: f64, mu: f64) -> (f64, f64) {
    (mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu), lambda / (2.0 * (lambda + mu)))
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        if let Problem::Elasticity(p) = self {
            if !(p.nu > 0.0 && p.nu < 0.5) {
                return Err(Error::Config(format!("Poisson ratio must lie in (0, 0.5), got {}", p.nu)));
            }
            if p.youngs_modulus.mean().iter().any(|&e| !(e > 0.0)) {
                return Err(Error::Config("mean Young's modulus must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn components(&self) -> usize {
        match self {
            Problem::Diffusion(_) => 1,
            Problem::Elasticity(_) => 3,
        }
    }

    pub fn coefficient(&self) -> &LognormalPce {
        match self {
            Problem::Diffusion(p) => &p.coefficient,
            Problem::Elasticity(p) => &p.youngs_modulus,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.coefficient().n_terms()
    }

    pub fn body_force(&self) -> Vec<f64> {
        match self {
            Problem::Diffusion(p) => vec![p.forcing],
            Problem::Elasticity(p) => vec![0.0, -p.rho * p.gravity, 0.0],
        }
    }

    /// Element matrix for a unit coefficient, row-major `n × n` with
    /// `n = 4 · components`.
    pub fn unit_element(&self, coords: &[[f64; 3]; 4]) -> Result<Vec<f64>> {
        match self {
            Problem::Diffusion(_) => Ok(diffusion_element(coords, 1.0)?.iter().flatten().copied().collect()),
            Problem::Elasticity(p) => {
                let (lambda, mu) = lame_from_youngs(1.0, p.nu);
                Ok(elasticity_element(coords, lambda, mu)?.iter().flatten().copied().collect())
            }
        }
    }

    /// One-point (centroid) value of coefficient mode `mode` on a tet.
    pub fn element_coefficient(&self, mode: usize, tet: &[usize; 4]) -> f64 {
        centroid_value(&self.coefficient().coeffs[mode], tet)
    }
}

pub fn centroid_value(field: &[f64], tet: &[usize; 4]) -> f64 {
    0.25 * tet.iter().map(|&n| field[n]).sum::<f64>()
}

/// Volume and barycentric-coordinate gradients of a tet.
pub fn shape_gradients(x: &[[f64; 3]; 4]) -> Result<(f64, [[f64; 3]; 4])> {
    let volume = signed_volume(x);
    let scale = (0..3)
        .flat_map(|a| (0..3).map(move |c| (x[a + 1][c] - x[0][c]).abs()))
        .fold(0.0f64, f64::max);
    if !(volume > 1e-12 * scale.powi(3)) {
        return Err(Error::DegenerateElement { volume });
    }
    // Rows of J⁻¹ with J = [x1-x0 | x2-x0 | x3-x0] are ∇λ1..∇λ3.
    let e = |a: usize| [x[a][0] - x[0][0], x[a][1] - x[0][1], x[a][2] - x[0][2]];
    let (a, b, c) = (e(1), e(2), e(3));
    let cross = |u: [f64; 3], v: [f64; 3]| [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let det = 6.0 * volume;
    let g1 = cross(b, c).map(|v| v / det);
    let g2 = cross(c, a).map(|v| v / det);
    let g3 = cross(a, b).map(|v| v / det);
    let g0 = [-(g1[0] + g2[0] + g3[0]), -(g1[1] + g2[1] + g3[1]), -(g1[2] + g2[2] + g3[2])];
    Ok((volume, [g0, g1, g2, g3]))
}

/// `coeff · V · G Gᵀ`.
pub fn diffusion_element(x: &[[f64; 3]; 4], coeff: f64) -> Result<[[f64; 4]; 4]> {
    let (v, g) = shape_gradients(x)?;
    let mut k = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            k[a][b] = coeff * v * (g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2]);
        }
    }
    Ok(k)
}

/// `V · Bᵀ D B` with node-major dof ordering `(node, component)`.
pub fn elasticity_element(x: &[[f64; 3]; 4], lambda: f64, mu: f64) -> Result<[[f64; 12]; 12]> {
    let (v, g) = shape_gradients(x)?;
    // Voigt order: xx, yy, zz, yz, xz, xy (engineering shear).
    let mut bmat = [[0.0; 12]; 6];
    for a in 0..4 {
        let [gx, gy, gz] = g[a];
        let c = 3 * a;
        bmat[0][c] = gx;
        bmat[1][c + 1] = gy;
        bmat[2][c + 2] = gz;
        bmat[3][c + 1] = gz;
        bmat[3][c + 2] = gy;
        bmat[4][c] = gz;
        bmat[4][c + 2] = gx;
        bmat[5][c] = gy;
        bmat[5][c + 1] = gx;
    }
    let mut d = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            d[i][j] = lambda;
        }
        d[i][i] += 2.0 * mu;
        d[i + 3][i + 3] = mu;
    }
    let mut db = [[0.0; 12]; 6];
    for i in 0..6 {
        for j in 0..12 {
            db[i][j] = (0..6).map(|m| d[i][m] * bmat[m][j]).sum();
        }
    }
    let mut k = [[0.0; 12]; 12];
    for i in 0..12 {
        for j in 0..12 {
            k[i][j] = v * (0..6).map(|m| bmat[m][i] * db[m][j]).sum::<f64>();
        }
    }
    Ok(k)
}

/// Assembles `Σ_e coeff(e) K_e` over `elements`, keeping only nodes that
/// `node_map` numbers (Dirichlet nodes map to `None` and are eliminated).
pub fn assemble_matrix(
    mesh: &BoxMesh,
    problem: &Problem,
    elements: &[usize],
    node_map: &dyn Fn(usize) -> Option<usize>,
    n_local_nodes: usize,
    coeff: &dyn Fn(usize) -> f64,
) -> Result<CsrMatrix> {
    let nc = problem.components();
    let ne = 4 * nc;
    let mut triplets = Vec::with_capacity(elements.len() * ne * ne);
    for &e in elements {
        let tet = &mesh.tets()[e];
        let ke = problem.unit_element(&mesh.tet_coords(e))?;
        let c = coeff(e);
        let dofs: Vec<Option<usize>> = (0..ne).map(|a| node_map(tet[a / nc]).map(|l| l * nc + a % nc)).collect();
        for (a, ra) in dofs.iter().enumerate() {
            let Some(r) = *ra else { continue };
            for (b, cb) in dofs.iter().enumerate() {
                let Some(col) = *cb else { continue };
                triplets.push((r, col, c * ke[a * ne + b]));
            }
        }
    }
    let n = n_local_nodes * nc;
    Ok(CsrMatrix::from_triplets(n, n, triplets))
}

/// Consistent load of the constant body force, `b · V/4` per tet node.
pub fn assemble_load(
    mesh: &BoxMesh,
    problem: &Problem,
    elements: &[usize],
    node_map: &dyn Fn(usize) -> Option<usize>,
    n_local_nodes: usize,
) -> Vec<f64> {
    let nc = problem.components();
    let force = problem.body_force();
    let mut f = vec![0.0; n_local_nodes * nc];
    for &e in elements {
        let quarter = signed_volume(&mesh.tet_coords(e)) / 4.0;
        for &n in &mesh.tets()[e] {
            if let Some(l) = node_map(n) {
                for (c, b) in force.iter().enumerate() {
                    f[l * nc + c] += b * quarter;
                }
            }
        }
    }
    f
}

/// Deterministic mode matrices `Ā_i` and load of one subdomain, in the
/// subdomain's interior-then-interface numbering.
#[derive(Debug, Clone)]
pub struct ModeMatrices {
    pub layout: SubdomainLayout,
    pub modes: Vec<CsrMatrix>,
    pub load: Vec<f64>,
}

pub fn assemble_modes(
    mesh: &BoxMesh,
    partition: &Partition,
    classes: &Classification,
    s: usize,
    problem: &Problem,
) -> Result<ModeMatrices> {
    let elements = partition.elements(s);
    if elements.is_empty() {
        return Err(Error::EmptySubdomain(s));
    }
    let layout = classes.layout(partition, s, problem.components());
    let n_local = layout.interior_nodes.len() + layout.interface_nodes.len();
    let node_map = |n: usize| layout.local_node(n);
    let modes = (0..problem.n_modes())
        .map(|i| {
            assemble_matrix(mesh, problem, elements, &node_map, n_local, &|e| {
                problem.element_coefficient(i, &mesh.tets()[e])
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let load = assemble_load(mesh, problem, elements, &node_map, n_local);
    Ok(ModeMatrices { layout, modes, load })
}

/// Global numbering of the non-Dirichlet nodes (ascending node id).
#[derive(Debug, Clone)]
pub struct FreeNodes {
    index: Vec<Option<usize>>,
    nodes: Vec<usize>,
}

impl FreeNodes {
    pub fn new(mesh: &BoxMesh) -> Self {
        let mut index = vec![None; mesh.n_nodes()];
        let mut nodes = Vec::new();
        for n in 0..mesh.n_nodes() {
            if !mesh.is_dirichlet(n) {
                index[n] = Some(nodes.len());
                nodes.push(n);
            }
        }
        Self { index, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, node: usize) -> Option<usize> {
        self.index[node]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }
}

/// Whole-mesh matrix for one nodal coefficient field (no decomposition).
pub fn assemble_global(mesh: &BoxMesh, problem: &Problem, free: &FreeNodes, nodal_coeff: &[f64]) -> Result<CsrMatrix> {
    let all: Vec<usize> = (0..mesh.tets().len()).collect();
    assemble_matrix(mesh, problem, &all, &|n| free.index_of(n), free.len(), &|e| {
        centroid_value(nodal_coeff, &mesh.tets()[e])
    })
}

pub fn assemble_global_load(mesh: &BoxMesh, problem: &Problem, free: &FreeNodes) -> Vec<f64> {
    let all: Vec<usize> = (0..mesh.tets().len()).collect();
    assemble_load(mesh, problem, &all, &|n| free.index_of(n), free.len())
}
