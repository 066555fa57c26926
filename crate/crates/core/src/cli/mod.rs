//! Configuration, pipeline and subcommand drivers behind the `ssdd` binary.

pub mod config;
pub mod moments;
pub mod pipeline;
pub mod run;
pub mod sweep;

use serde::{Deserialize, Serialize};

pub use config::{parse_overrides, BeamParams, ProblemKind, RunConfig};
pub use moments::{compute_moments, Moments};
pub use pipeline::{Pipeline, Solution};
pub use run::{run, RunResult};
pub use sweep::{custom_points, run_sweep, Preset, SweepPoint, SweepRow};

use crate::error::Result;
use crate::krylov::PcgOptions;
use crate::oracle::{dense_solve, relative_l2};
use crate::precond::PreconditionerKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub preconditioner: String,
    pub iterations: usize,
    pub converged: bool,
    /// `‖u_DD − u_dense‖ / ‖u_dense‖` over all chaos blocks and nodes.
    pub relative_error: f64,
    pub dense_residual: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Solves with every preconditioner in `kinds` and compares against the
/// dense global Galerkin solve.
pub fn oracle_check(config: RunConfig, kinds: &[PreconditionerKind], opts: PcgOptions, threshold: f64) -> Result<Vec<OracleCheck>> {
    let pipeline = Pipeline::prepare(config)?;
    let dense = dense_solve(&pipeline.mesh, &pipeline.problem, &pipeline.tensor)?;
    let reference: Vec<f64> = dense.to_nodal(pipeline.mesh.n_nodes()).concat();
    kinds
        .iter()
        .map(|&kind| {
            let sol = pipeline.solve(kind, opts)?;
            let relative_error = relative_l2(&sol.nodal.concat(), &reference);
            Ok(OracleCheck {
                preconditioner: kind.to_string(),
                iterations: sol.report.iterations,
                converged: sol.report.converged,
                relative_error,
                dense_residual: dense.residual,
                threshold,
                passed: sol.report.converged && relative_error <= threshold,
            })
        })
        .collect()
}
