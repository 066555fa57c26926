//! Two-level Neumann–Neumann preconditioners on the extended Schur system.
//!
//! Every variant applies
//!
//! ```text
//! M⁻¹ = Σ_s Rᵀ D (R_Fᵀ S_FF⁻¹ R_F) D R  +  R₀ᵀ F_WW⁻¹ R₀
//! R₀  = Σ_s Bᵀ (R_W − S_WF S_FF⁻¹ R_F) D R
//! F_WW = Σ_s Bᵀ (S_WW − S_WF S_FF⁻¹ S_FW) B
//! ```
//!
//! and they differ only in the coarse set `W`: empty, the vertices, or the
//! whole wirebasket. `F` is the rest of each local interface.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dense_mul_add, dense_select, dense_tmul_add, DenseCholesky};
use crate::mesh::{Classification, NodeClass, NodeSet, Partition};
use crate::schur::{RestrictionMap, SchurContext};

/// Relative diagonal shift applied when a local face block is singular.
pub const FLOATING_SHIFT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    NoCoarse,
    Vertex,
    Wirebasket,
}

impl PreconditionerKind {
    pub const ALL: [PreconditionerKind; 3] = [Self::NoCoarse, Self::Vertex, Self::Wirebasket];

    fn in_coarse(self, class: NodeClass) -> bool {
        match self {
            Self::NoCoarse => false,
            Self::Vertex => class == NodeClass::Vertex,
            Self::Wirebasket => class.is_wirebasket(),
        }
    }

    fn coarse_nodes(self, classes: &Classification) -> NodeSet {
        match self {
            Self::NoCoarse => NodeSet::default(),
            Self::Vertex => classes.vertices().clone(),
            Self::Wirebasket => classes.wirebasket().clone(),
        }
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NoCoarse => "nocoarse",
            Self::Vertex => "vertex",
            Self::Wirebasket => "wirebasket",
        })
    }
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nocoarse" | "no-coarse" | "none" => Ok(Self::NoCoarse),
            "vertex" => Ok(Self::Vertex),
            "wirebasket" => Ok(Self::Wirebasket),
            other => Err(Error::Config(format!("unknown preconditioner '{other}'"))),
        }
    }
}

/// Dense local Schur matrices `S^s`, one per subdomain.
pub fn local_schur_matrices(ctx: &SchurContext) -> Vec<Mat<f64>> {
    ctx.subdomains.par_iter().map(|s| s.dense()).collect()
}

/// Multiplicity scaling `D_s` on the local interface entries of `s`.
pub fn scaling(ctx: &SchurContext, partition: &Partition, s: usize) -> Vec<f64> {
    let sub = &ctx.subdomains[s];
    (0..sub.restriction.local_len())
        .map(|i| {
            let node = sub.layout.interface_nodes[sub.restriction.local_node(i)];
            1.0 / partition.multiplicity(node) as f64
        })
        .collect()
}

#[derive(Debug)]
struct LocalPart {
    restriction: RestrictionMap,
    scale: Vec<f64>,
    f_idx: Vec<usize>,
    w_idx: Vec<usize>,
    /// Coarse index of each entry of `w_idx` (the map `B_W^s`).
    w_coarse: Vec<usize>,
    s_ff: DenseCholesky,
    s_wf: Mat<f64>,
    /// `S_WW − S_WF S_FF⁻¹ S_FW`.
    coarse_block: Mat<f64>,
}

#[derive(Debug)]
pub struct TwoLevelPreconditioner {
    kind: PreconditionerKind,
    locals: Vec<LocalPart>,
    coarse: Option<DenseCholesky>,
    coarse_dim: usize,
    global_dim: usize,
    regularized: usize,
}

impl TwoLevelPreconditioner {
    pub fn build(
        ctx: &SchurContext,
        classes: &Classification,
        partition: &Partition,
        kind: PreconditionerKind,
        local_schur: &[Mat<f64>],
    ) -> Result<Self> {
        let coarse_nodes = kind.coarse_nodes(classes);
        let nc = ctx.components;
        let coarse_per_block = coarse_nodes.len() * nc;
        let coarse_dim = coarse_per_block * ctx.n_blocks;
        let mut locals = ctx
            .subdomains
            .par_iter()
            .zip(local_schur)
            .enumerate()
            .map(|(s, (sub, smat))| -> Result<LocalPart> {
                let r = &sub.restriction;
                let (mut f_idx, mut w_idx, mut w_coarse) = (Vec::new(), Vec::new(), Vec::new());
                let per_block = sub.layout.interface_nodes.len() * nc;
                for i in 0..r.local_len() {
                    let node = sub.layout.interface_nodes[r.local_node(i)];
                    if kind.in_coarse(classes.class(node)) {
                        let (k, c) = (i / per_block, i % nc);
                        let slot = coarse_nodes.index_of(node).expect("coarse node");
                        w_idx.push(i);
                        w_coarse.push(k * coarse_per_block + slot * nc + c);
                    } else {
                        f_idx.push(i);
                    }
                }
                let s_ff = DenseCholesky::factor_regularized(
                    &dense_select(smat, &f_idx, &f_idx),
                    FLOATING_SHIFT,
                    &format!("local face Schur block of subdomain {s}"),
                )?;
                let s_wf = dense_select(smat, &w_idx, &f_idx);
                let mut x = s_wf.transpose().to_owned();
                s_ff.solve_mat_in_place(&mut x);
                let coarse_block = dense_select(smat, &w_idx, &w_idx) - &s_wf * &x;
                Ok(LocalPart {
                    restriction: r.clone(),
                    scale: scaling(ctx, partition, s),
                    f_idx,
                    w_idx,
                    w_coarse,
                    s_ff,
                    s_wf,
                    coarse_block,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let regularized = locals.iter().filter(|l| l.s_ff.shift() > 0.0).count();
        let coarse = if coarse_dim > 0 {
            let f = coarse_matrix(&locals, coarse_dim);
            Some(DenseCholesky::factor(&f, "coarse wirebasket operator")?)
        } else {
            None
        };
        for l in &mut locals {
            l.coarse_block = Mat::zeros(0, 0);
        }
        Ok(Self {
            kind,
            locals,
            coarse,
            coarse_dim,
            global_dim: ctx.dim(),
            regularized,
        })
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn coarse_dim(&self) -> usize {
        self.coarse_dim
    }

    /// Subdomains whose face block needed the floating-subdomain shift.
    pub fn regularized_subdomains(&self) -> usize {
        self.regularized
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.global_dim);
        let parts: Vec<(Vec<f64>, Vec<f64>)> = self
            .locals
            .par_iter()
            .map(|l| {
                let v: Vec<f64> = l.restriction.gather(r).iter().zip(&l.scale).map(|(a, d)| a * d).collect();
                let mut y: Vec<f64> = l.f_idx.iter().map(|&i| v[i]).collect();
                l.s_ff.solve_in_place(&mut y);
                let mut t = vec![0.0; v.len()];
                for (&i, yi) in l.f_idx.iter().zip(&y) {
                    t[i] = yi * l.scale[i];
                }
                let mut c: Vec<f64> = l.w_idx.iter().map(|&i| v[i]).collect();
                dense_mul_add(&l.s_wf, -1.0, &y, &mut c);
                (t, c)
            })
            .collect();
        let mut z = vec![0.0; self.global_dim];
        for (l, (t, _)) in self.locals.iter().zip(&parts) {
            l.restriction.scatter_add(t, &mut z);
        }
        let Some(coarse) = &self.coarse else { return z };
        let mut d = vec![0.0; self.coarse_dim];
        for (l, (_, c)) in self.locals.iter().zip(&parts) {
            for (&g, v) in l.w_coarse.iter().zip(c) {
                d[g] += v;
            }
        }
        coarse.solve_in_place(&mut d);
        let lifted: Vec<Vec<f64>> = self
            .locals
            .par_iter()
            .map(|l| {
                let w: Vec<f64> = l.w_coarse.iter().map(|&g| d[g]).collect();
                let mut q = vec![0.0; l.f_idx.len()];
                dense_tmul_add(&l.s_wf, -1.0, &w, &mut q);
                l.s_ff.solve_in_place(&mut q);
                let mut t = vec![0.0; l.scale.len()];
                for (&i, wi) in l.w_idx.iter().zip(&w) {
                    t[i] = wi * l.scale[i];
                }
                for (&i, qi) in l.f_idx.iter().zip(&q) {
                    t[i] = qi * l.scale[i];
                }
                t
            })
            .collect();
        for (l, t) in self.locals.iter().zip(&lifted) {
            l.restriction.scatter_add(t, &mut z);
        }
        z
    }
}

fn coarse_matrix(locals: &[LocalPart], dim: usize) -> Mat<f64> {
    let mut f = Mat::zeros(dim, dim);
    for l in locals {
        for (a, &ga) in l.w_coarse.iter().enumerate() {
            for (b, &gb) in l.w_coarse.iter().enumerate() {
                f[(ga, gb)] += l.coarse_block[(a, b)];
            }
        }
    }
    f
}
