//! End-to-end solve: mesh, KLE, chaos projection, Schur assembly,
//! preconditioner, PCGM and interior recovery.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::config::{ProblemKind, RunConfig};
use crate::error::{Result, StageContext};
use crate::fem::{DiffusionProblem, ElasticityProblem, Problem};
use crate::klexp::{assemble_covariance, solve_kle, CovarianceKernel, KlExpansion};
use crate::krylov::{pcgm, PcgOptions, SolveReport};
use crate::mesh::{BoxMesh, Classification, Partition};
use crate::pce::{project_lognormal, triple_products, PcBasis, TripleProductTensor};
use crate::precond::{local_schur_matrices, PreconditionerKind, TwoLevelPreconditioner};
use crate::schur::SchurContext;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SetupTimings {
    pub mesh_s: f64,
    pub kle_s: f64,
    pub pce_s: f64,
    pub assembly_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTimings {
    /// Dense local Schur matrices; zero when already cached.
    pub local_schur_s: f64,
    pub preconditioner_s: f64,
    pub rhs_s: f64,
    pub pcgm_s: f64,
    pub recovery_s: f64,
}

/// Everything that does not depend on the preconditioner.
pub struct Pipeline {
    pub config: RunConfig,
    pub mesh: BoxMesh,
    pub partition: Partition,
    pub classes: Classification,
    pub kle: KlExpansion,
    pub problem: Problem,
    pub input_basis: PcBasis,
    pub output_basis: PcBasis,
    pub tensor: Arc<TripleProductTensor>,
    pub ctx: SchurContext,
    pub timings: SetupTimings,
    local_schur: OnceLock<Vec<Mat<f64>>>,
}

pub struct Solution {
    pub kind: PreconditionerKind,
    pub report: SolveReport,
    pub u_gamma: Vec<f64>,
    /// One nodal field per output chaos term, `node * components + c`.
    pub nodal: Vec<Vec<f64>>,
    pub coarse_dim: usize,
    pub regularized_subdomains: usize,
    pub timings: SolveTimings,
}

/// KLE of the configured covariance on the mesh nodes; zero modes when
/// `sigma = 0`, sign-randomized when a seed is set.
pub fn build_kle(config: &RunConfig, mesh: &BoxMesh) -> Result<KlExpansion> {
    let kle = if config.sigma == 0.0 {
        KlExpansion::zero(mesh.n_nodes(), config.l)
    } else {
        let kernel = CovarianceKernel::new(config.sigma, config.bx, config.by, config.bz)?;
        solve_kle(&assemble_covariance(mesh.nodes(), &kernel), &mesh.lumped_volumes(), config.l)?
    };
    Ok(match config.seed {
        Some(seed) => kle.with_random_signs(seed),
        None => kle,
    })
}

/// Builds the problem with coefficient `exp(g₀ + g)` projected onto
/// `input`; `g₀ = 0` for Poisson and `ln E₀` for the beam.
pub fn build_problem(config: &RunConfig, mesh: &BoxMesh, kle: &KlExpansion, input: &PcBasis) -> Result<Problem> {
    let problem = match config.problem {
        ProblemKind::Poisson => Problem::Diffusion(DiffusionProblem {
            forcing: config.forcing,
            coefficient: project_lognormal(&vec![0.0; mesh.n_nodes()], &kle.modes, input)?,
        }),
        ProblemKind::Elasticity => {
            let b = &config.beam;
            Problem::Elasticity(ElasticityProblem {
                nu: b.nu,
                rho: b.rho,
                gravity: b.gravity(),
                youngs_modulus: project_lognormal(&vec![b.e0.ln(); mesh.n_nodes()], &kle.modes, input)?,
            })
        }
    };
    problem.validate()?;
    Ok(problem)
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

impl Pipeline {
    pub fn prepare(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mut timings = SetupTimings::default();
        let t = Instant::now();
        let mesh = BoxMesh::build(config.cells, config.extents, config.dirichlet()).stage("mesh")?;
        let partition = Partition::boxes(&mesh, config.partition).stage("partition")?;
        let classes = Classification::classify(&mesh, &partition);
        timings.mesh_s = elapsed(t);
        log::info!(
            "mesh {:?}: {} nodes, {} tets, {} subdomains, {} interface nodes",
            config.cells,
            mesh.n_nodes(),
            mesh.tets().len(),
            partition.n_subdomains(),
            classes.interface().len()
        );

        let t = Instant::now();
        let kle = build_kle(&config, &mesh).stage("kle")?;
        timings.kle_s = elapsed(t);

        let t = Instant::now();
        let input_basis = PcBasis::enumerate(config.l, config.p_a);
        let output_basis = PcBasis::enumerate(config.l, config.p_u);
        let problem = build_problem(&config, &mesh, &kle, &input_basis).stage("pce")?;
        let tensor = Arc::new(triple_products(&input_basis, &output_basis).stage("pce")?);
        timings.pce_s = elapsed(t);
        log::info!(
            "chaos: {} input terms, {} output terms, {} triple products",
            input_basis.len(),
            output_basis.len(),
            tensor.nnz()
        );

        let t = Instant::now();
        let ctx = SchurContext::build(&mesh, &partition, &classes, &problem, tensor.clone())?;
        timings.assembly_s = elapsed(t);
        log::info!("interface system of dimension {}", ctx.dim());

        Ok(Self {
            config,
            mesh,
            partition,
            classes,
            kle,
            problem,
            input_basis,
            output_basis,
            tensor,
            ctx,
            timings,
            local_schur: OnceLock::new(),
        })
    }

    pub fn components(&self) -> usize {
        self.problem.components()
    }

    /// Dense local Schur matrices, computed on first use.
    pub fn local_schur(&self) -> (&[Mat<f64>], f64) {
        let mut spent = 0.0;
        let m = self.local_schur.get_or_init(|| {
            let t = Instant::now();
            let m = local_schur_matrices(&self.ctx);
            spent = elapsed(t);
            m
        });
        (m, spent)
    }

    pub fn solve(&self, kind: PreconditionerKind, opts: PcgOptions) -> Result<Solution> {
        let mut timings = SolveTimings::default();
        let (schur, spent) = self.local_schur();
        timings.local_schur_s = spent;

        let t = Instant::now();
        let pre = TwoLevelPreconditioner::build(&self.ctx, &self.classes, &self.partition, kind, schur)
            .stage("preconditioner")?;
        timings.preconditioner_s = elapsed(t);
        if pre.regularized_subdomains() > 0 {
            log::warn!("{} subdomain face blocks needed a diagonal shift", pre.regularized_subdomains());
        }

        let t = Instant::now();
        let g = self.ctx.rhs();
        timings.rhs_s = elapsed(t);

        let t = Instant::now();
        let op = |x: &[f64]| self.ctx.apply(x);
        let prec = |r: &[f64]| pre.apply(r);
        let (u_gamma, report) = pcgm(&op, &prec, &g, &vec![0.0; g.len()], opts).stage("pcgm")?;
        timings.pcgm_s = elapsed(t);
        if report.converged {
            log::info!("{kind}: converged in {} iterations", report.iterations);
        } else {
            log::warn!("{kind}: no convergence after {} iterations", report.iterations);
        }

        let t = Instant::now();
        let interiors = self.ctx.recover_interior(&u_gamma);
        let nodal = self.ctx.to_nodal(self.mesh.n_nodes(), &u_gamma, &interiors);
        timings.recovery_s = elapsed(t);

        Ok(Solution {
            kind,
            report,
            u_gamma,
            nodal,
            coarse_dim: pre.coarse_dim(),
            regularized_subdomains: pre.regularized_subdomains(),
            timings,
        })
    }
}
