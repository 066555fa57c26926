//! Extended Schur complement over the global interface, its right-hand
//! side, and interior recovery.
//!
//! Global interface vectors are ordered PCE block, then interface node,
//! then component.

use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;

use crate::error::{Result, StageContext};
use crate::fem::{assemble_modes, Problem};
use crate::linalg::SparseCholesky;
use crate::mesh::{BoxMesh, Classification, Partition, SubdomainLayout};
use crate::pce::TripleProductTensor;
use crate::ssfem::{deterministic_load, split_interior_interface, SplitBlocks};

/// Gather/scatter between a subdomain's local interface vector and the
/// global one, replicated over PCE blocks and components.
#[derive(Debug, Clone)]
pub struct RestrictionMap {
    slots: Vec<usize>,
    components: usize,
    n_global_nodes: usize,
    n_blocks: usize,
}

impl RestrictionMap {
    pub fn new(slots: Vec<usize>, components: usize, n_global_nodes: usize, n_blocks: usize) -> Self {
        Self { slots, components, n_global_nodes, n_blocks }
    }

    pub fn local_len(&self) -> usize {
        self.slots.len() * self.components * self.n_blocks
    }

    pub fn global_len(&self) -> usize {
        self.n_global_nodes * self.components * self.n_blocks
    }

    /// Global index of local stochastic interface entry `idx`.
    pub fn global_index(&self, idx: usize) -> usize {
        let per_block = self.slots.len() * self.components;
        let (k, rest) = (idx / per_block, idx % per_block);
        let (l, c) = (rest / self.components, rest % self.components);
        (k * self.n_global_nodes + self.slots[l]) * self.components + c
    }

    /// Local node position of local stochastic interface entry `idx`.
    pub fn local_node(&self, idx: usize) -> usize {
        (idx % (self.slots.len() * self.components)) / self.components
    }

    /// `R x`.
    pub fn gather(&self, global: &[f64]) -> Vec<f64> {
        (0..self.local_len()).map(|i| global[self.global_index(i)]).collect()
    }

    /// `y += Rᵀ x`.
    pub fn scatter_add(&self, local: &[f64], global: &mut [f64]) {
        for (i, v) in local.iter().enumerate() {
            global[self.global_index(i)] += v;
        }
    }
}

/// One subdomain's share of the Schur system.
#[derive(Debug)]
pub struct LocalSchur {
    pub layout: SubdomainLayout,
    pub blocks: SplitBlocks,
    /// Factor of the explicit interior block; `None` without interior dofs.
    pub factor: Option<SparseCholesky>,
    pub load_interior: Vec<f64>,
    pub load_interface: Vec<f64>,
    pub restriction: RestrictionMap,
}

impl LocalSchur {
    fn solve_interior(&self, v: &mut [f64]) {
        if let Some(f) = &self.factor {
            f.solve_in_place(v);
        }
    }

    /// `(𝒜_ΓΓ − 𝒜_ΓI 𝒜_II⁻¹ 𝒜_IΓ) x` on local interface vectors.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.blocks.gg.apply(x);
        if self.factor.is_some() {
            let mut w = self.blocks.ig.apply(x);
            self.solve_interior(&mut w);
            self.blocks.gi.apply_add(-1.0, &w, &mut y);
        }
        y
    }

    /// Dense local Schur matrix in local interface ordering, symmetrized.
    pub fn dense(&self) -> Mat<f64> {
        let mut s = self.blocks.gg.to_dense();
        if let Some(f) = &self.factor {
            // 𝒜_ΓI = 𝒜_IΓᵀ.
            let b = self.blocks.ig.to_dense();
            let mut x = b.clone();
            f.solve_mat_in_place(&mut x);
            s -= b.transpose() * &x;
        }
        let t = s.transpose().to_owned();
        (&s + &t) * faer::Scale(0.5)
    }
}

#[derive(Debug)]
pub struct SchurContext {
    pub subdomains: Vec<LocalSchur>,
    pub components: usize,
    pub n_blocks: usize,
    pub n_interface_nodes: usize,
    pub tensor: Arc<TripleProductTensor>,
}

impl SchurContext {
    pub fn build(
        mesh: &BoxMesh,
        partition: &Partition,
        classes: &Classification,
        problem: &Problem,
        tensor: Arc<TripleProductTensor>,
    ) -> Result<Self> {
        let n_sub = partition.n_subdomains();
        let n_blocks = tensor.n_output();
        let n_interface_nodes = classes.interface().len();
        let components = problem.components();
        let subdomains = (0..n_sub)
            .into_par_iter()
            .map(|s| -> Result<LocalSchur> {
                let modes = assemble_modes(mesh, partition, classes, s, problem).stage("assembly")?;
                let blocks = split_interior_interface(&modes, tensor.clone(), n_sub).stage("assembly")?;
                let ni = modes.layout.n_interior_dofs();
                let factor = if ni > 0 {
                    Some(SparseCholesky::factor(&blocks.ii.assemble(), &format!("interior block of subdomain {s}"))?)
                } else {
                    None
                };
                let load = &modes.load;
                let load_interior = deterministic_load(&load[..ni], n_blocks);
                let load_interface = deterministic_load(&load[ni..], n_blocks);
                let restriction = RestrictionMap::new(
                    modes.layout.interface_slots.clone(),
                    components,
                    n_interface_nodes,
                    n_blocks,
                );
                Ok(LocalSchur {
                    layout: modes.layout,
                    blocks,
                    factor,
                    load_interior,
                    load_interface,
                    restriction,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            subdomains,
            components,
            n_blocks,
            n_interface_nodes,
            tensor,
        })
    }

    /// Global interface dimension `n_Γ · components · P_u`.
    pub fn dim(&self) -> usize {
        self.n_interface_nodes * self.components * self.n_blocks
    }

    /// Sums per-subdomain local vectors into a global one in ascending
    /// subdomain order.
    pub fn gather_add(&self, locals: &[Vec<f64>]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (sub, v) in self.subdomains.iter().zip(locals) {
            sub.restriction.scatter_add(v, &mut y);
        }
        y
    }

    /// `𝒮 x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let locals: Vec<Vec<f64>> = self
            .subdomains
            .par_iter()
            .map(|sub| sub.apply(&sub.restriction.gather(x)))
            .collect();
        self.gather_add(&locals)
    }

    /// `g_Γ = Σ Rᵀ(ℱ_Γ − 𝒜_ΓI 𝒜_II⁻¹ ℱ_I)`.
    pub fn rhs(&self) -> Vec<f64> {
        let locals: Vec<Vec<f64>> = self
            .subdomains
            .par_iter()
            .map(|sub| {
                let mut g = sub.load_interface.clone();
                if sub.factor.is_some() {
                    let mut w = sub.load_interior.clone();
                    sub.solve_interior(&mut w);
                    sub.blocks.gi.apply_add(-1.0, &w, &mut g);
                }
                g
            })
            .collect();
        self.gather_add(&locals)
    }

    /// `u_I = 𝒜_II⁻¹(ℱ_I − 𝒜_IΓ R u_Γ)` per subdomain.
    pub fn recover_interior(&self, u_gamma: &[f64]) -> Vec<Vec<f64>> {
        self.subdomains
            .par_iter()
            .map(|sub| {
                let mut v = sub.load_interior.clone();
                sub.blocks.ig.apply_add(-1.0, &sub.restriction.gather(u_gamma), &mut v);
                sub.solve_interior(&mut v);
                v
            })
            .collect()
    }

    /// Scatters interface and interior solutions to nodal fields, one per
    /// PCE block, `node * components + c` within a block. Dirichlet nodes
    /// stay zero.
    pub fn to_nodal(&self, n_nodes: usize, u_gamma: &[f64], interiors: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let nc = self.components;
        let mut out = vec![vec![0.0; n_nodes * nc]; self.n_blocks];
        let ngd = self.n_interface_nodes * nc;
        for sub in &self.subdomains {
            for (slot_pos, &node) in sub.layout.interface_nodes.iter().enumerate() {
                let slot = sub.layout.interface_slots[slot_pos];
                for (k, block) in out.iter_mut().enumerate() {
                    for c in 0..nc {
                        block[node * nc + c] = u_gamma[k * ngd + slot * nc + c];
                    }
                }
            }
        }
        for (sub, ui) in self.subdomains.iter().zip(interiors) {
            let ni = sub.layout.n_interior_dofs();
            for (l, &node) in sub.layout.interior_nodes.iter().enumerate() {
                for (k, block) in out.iter_mut().enumerate() {
                    for c in 0..nc {
                        block[node * nc + c] = ui[k * ni + l * nc + c];
                    }
                }
            }
        }
        out
    }
}
