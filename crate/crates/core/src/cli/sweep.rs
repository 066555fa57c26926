//! The `sweep` subcommand: one axis varied, every requested
//! preconditioner solved at each point, one CSV row per solve.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::pipeline::Pipeline;
use crate::error::{Error, Result};
use crate::precond::PreconditionerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Cells per subdomain edge 1, 2, 3 on the base partition.
    Mesh,
    /// Subdomains grow with the mesh (fixed cells per subdomain) and the
    /// number of random variables grows alongside.
    Weak,
    /// Subdomains grow on the base mesh.
    Subdomains,
    /// Random variables `L = 2..5`.
    RandomVariables,
    /// Output order `p_u = 1..4`.
    Order,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Self::Mesh, Self::Weak, Self::Subdomains, Self::RandomVariables, Self::Order];

    pub fn axis(&self) -> &'static str {
        match self {
            Self::Mesh => "cells_per_subdomain",
            Self::Weak | Self::Subdomains => "subdomains",
            Self::RandomVariables => "L",
            Self::Order => "p_u",
        }
    }

    /// Sweep points as `(label, overrides)` relative to `base`.
    pub fn points(&self, base: &RunConfig) -> Vec<SweepPoint> {
        let triple = |v: [usize; 3]| format!("{},{},{}", v[0], v[1], v[2]);
        let per_sub = [0, 1, 2].map(|a| base.cells[a] / base.partition[a]);
        let grids: [[usize; 3]; 6] = [[2, 1, 1], [2, 2, 1], [2, 2, 2], [4, 2, 2], [4, 4, 2], [4, 4, 4]];
        let n_sub = |g: [usize; 3]| (g[0] * g[1] * g[2]).to_string();
        match self {
            Self::Mesh => (1..=3)
                .map(|m| SweepPoint {
                    label: m.to_string(),
                    overrides: vec![("cells".into(), triple(base.partition.map(|p| p * m)))],
                })
                .collect(),
            Self::Weak => grids[..3]
                .iter()
                .enumerate()
                .map(|(i, &g)| SweepPoint {
                    label: n_sub(g),
                    overrides: vec![
                        ("partition".into(), triple(g)),
                        ("cells".into(), triple([0, 1, 2].map(|a| g[a] * per_sub[a]))),
                        ("L".into(), (2 + i).to_string()),
                    ],
                })
                .collect(),
            Self::Subdomains => grids
                .iter()
                .filter(|g| (0..3).all(|a| base.cells[a] % g[a] == 0))
                .map(|&g| SweepPoint { label: n_sub(g), overrides: vec![("partition".into(), triple(g))] })
                .collect(),
            Self::RandomVariables => (2..=5)
                .map(|l| SweepPoint { label: l.to_string(), overrides: vec![("L".into(), l.to_string())] })
                .collect(),
            Self::Order => (1..=4u32)
                .map(|p| SweepPoint {
                    label: p.to_string(),
                    overrides: vec![("p_u".into(), p.to_string()), ("p_a".into(), base.p_a.min(p).to_string())],
                })
                .collect(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mesh => "mesh",
            Self::Weak => "weak",
            Self::Subdomains => "subdomains",
            Self::RandomVariables => "rvs",
            Self::Order => "order",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mesh" | "a" => Ok(Self::Mesh),
            "weak" | "b" => Ok(Self::Weak),
            "subdomains" | "c" => Ok(Self::Subdomains),
            "rvs" | "random-variables" | "d" => Ok(Self::RandomVariables),
            "order" | "e" => Ok(Self::Order),
            other => Err(Error::Config(format!("unknown sweep preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub overrides: Vec<(String, String)>,
}

/// A single config key over `;`-separated values.
pub fn custom_points(axis: &str, values: &str) -> Vec<SweepPoint> {
    values
        .split(';')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| SweepPoint { label: v.into(), overrides: vec![(axis.into(), v.into())] })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep: String,
    pub axis: String,
    pub value: String,
    pub preconditioner: String,
    pub problem: String,
    pub cells: String,
    pub partition: String,
    pub n_subdomains: Option<usize>,
    pub l: Option<usize>,
    pub p_a: Option<u32>,
    pub p_u: Option<u32>,
    pub pce_terms: Option<usize>,
    pub interface_dofs: Option<usize>,
    pub coarse_dofs: Option<usize>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub condition_estimate: Option<f64>,
    pub setup_s: Option<f64>,
    pub local_schur_s: Option<f64>,
    pub preconditioner_s: Option<f64>,
    pub pcgm_s: Option<f64>,
    pub status: String,
    pub error: String,
}

/// Runs every point and preconditioner, streaming rows to `out`. Failed
/// points are recorded with `status = failed` and the sweep continues.
pub fn run_sweep<W: Write>(
    name: &str,
    axis: &str,
    base: &RunConfig,
    points: &[SweepPoint],
    kinds: &[PreconditionerKind],
    out: W,
) -> Result<Vec<SweepRow>> {
    let mut wr = csv::Writer::from_writer(out);
    let mut rows = Vec::new();
    for point in points {
        let fmt3 = |v: [usize; 3]| format!("{}x{}x{}", v[0], v[1], v[2]);
        let template = SweepRow {
            sweep: name.into(),
            axis: axis.into(),
            value: point.label.clone(),
            problem: base.problem.to_string(),
            ..Default::default()
        };
        let mut emit = |row: SweepRow| -> Result<()> {
            wr.serialize(&row)?;
            wr.flush()?;
            rows.push(row);
            Ok(())
        };
        let mut cfg = base.clone();
        let prepared = point
            .overrides
            .iter()
            .try_for_each(|(k, v)| cfg.set(k, v))
            .and_then(|_| {
                log::info!("sweep {name}: {axis} = {}", point.label);
                let t = Instant::now();
                Pipeline::prepare(cfg.clone()).map(|p| (p, t.elapsed().as_secs_f64()))
            });
        let (pipeline, setup_s) = match prepared {
            Ok(p) => p,
            Err(e) => {
                log::error!("sweep {name}: {axis} = {} failed: {e}", point.label);
                for kind in kinds {
                    emit(SweepRow {
                        preconditioner: kind.to_string(),
                        cells: fmt3(cfg.cells),
                        partition: fmt3(cfg.partition),
                        status: "failed".into(),
                        error: e.to_string(),
                        ..template.clone()
                    })?;
                }
                continue;
            }
        };
        for &kind in kinds {
            let mut row = SweepRow {
                preconditioner: kind.to_string(),
                cells: fmt3(cfg.cells),
                partition: fmt3(cfg.partition),
                n_subdomains: Some(pipeline.partition.n_subdomains()),
                l: Some(cfg.l),
                p_a: Some(cfg.p_a),
                p_u: Some(cfg.p_u),
                pce_terms: Some(pipeline.output_basis.len()),
                interface_dofs: Some(pipeline.ctx.dim()),
                setup_s: Some(setup_s),
                ..template.clone()
            };
            match pipeline.solve(kind, cfg.pcg_options()) {
                Ok(sol) => {
                    row.coarse_dofs = Some(sol.coarse_dim);
                    row.iterations = Some(sol.report.iterations);
                    row.converged = Some(sol.report.converged);
                    row.condition_estimate = sol.report.condition_estimate;
                    row.local_schur_s = Some(sol.timings.local_schur_s);
                    row.preconditioner_s = Some(sol.timings.preconditioner_s);
                    row.pcgm_s = Some(sol.timings.pcgm_s);
                    row.status = if sol.report.converged { "ok" } else { "not_converged" }.into();
                }
                Err(e) => {
                    log::error!("sweep {name}: {axis} = {} with {kind} failed: {e}", point.label);
                    row.status = "failed".into();
                    row.error = e.to_string();
                }
            }
            emit(row)?;
        }
    }
    Ok(rows)
}
