//! The `run` subcommand: one solve, results JSON and VTK fields.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ProblemKind, RunConfig};
use super::moments::{compute_moments, MomentSummary, Moments};
use super::pipeline::{Pipeline, SetupTimings, Solution, SolveTimings};
use crate::error::Result;
use crate::krylov::SolveReport;
use crate::vtk::VtkWriter;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n_nodes: usize,
    pub n_elements: usize,
    pub n_subdomains: usize,
    /// Rayon worker threads; subdomains are scheduled over these.
    pub n_tasks: usize,
    pub n_interface_nodes: usize,
    pub n_wirebasket_nodes: usize,
    pub n_vertex_nodes: usize,
    pub pce_input_terms: usize,
    pub pce_output_terms: usize,
    pub triple_products: usize,
    pub interface_dofs: usize,
    pub coarse_dofs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KleSummary {
    pub eigenvalues: Vec<f64>,
    pub relative_energy: Vec<f64>,
}

/// Vertical displacement averaged over the free end face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipSummary {
    pub mean_deflection: f64,
    pub sd_deflection: f64,
    pub euler_bernoulli: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub preconditioner: String,
    pub dimensions: Dimensions,
    pub kle: KleSummary,
    pub setup: SetupTimings,
    pub timings: SolveTimings,
    pub solve: SolveReport,
    pub regularized_subdomains: usize,
    pub moments: MomentSummary,
    pub tip: Option<TipSummary>,
    pub files: Vec<PathBuf>,
}

impl RunResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn dimensions(p: &Pipeline, sol: Option<&Solution>) -> Dimensions {
    Dimensions {
        n_nodes: p.mesh.n_nodes(),
        n_elements: p.mesh.tets().len(),
        n_subdomains: p.partition.n_subdomains(),
        n_tasks: rayon::current_num_threads(),
        n_interface_nodes: p.classes.interface().len(),
        n_wirebasket_nodes: p.classes.wirebasket().len(),
        n_vertex_nodes: p.classes.vertices().len(),
        pce_input_terms: p.input_basis.len(),
        pce_output_terms: p.output_basis.len(),
        triple_products: p.tensor.nnz(),
        interface_dofs: p.ctx.dim(),
        coarse_dofs: sol.map_or(0, |s| s.coarse_dim),
    }
}

pub fn moments(p: &Pipeline, sol: &Solution) -> Moments {
    compute_moments(&sol.nodal, p.tensor.norms(), p.components())
}

/// Face-averaged `u_y` at `x = L` with its standard deviation.
pub fn tip_summary(p: &Pipeline, sol: &Solution) -> Option<TipSummary> {
    if p.config.problem != ProblemKind::Elasticity {
        return None;
    }
    let [nx, ny, nz] = p.mesh.cells();
    let face: Vec<usize> = (0..=ny).flat_map(|j| (0..=nz).map(move |k| (j, k))).map(|(j, k)| p.mesh.node_at(nx, j, k)).collect();
    let avg = |u: &[f64]| face.iter().map(|&n| u[n * 3 + 1]).sum::<f64>() / face.len() as f64;
    let coeffs: Vec<f64> = sol.nodal.iter().map(|u| avg(u)).collect();
    let var: f64 = coeffs.iter().zip(p.tensor.norms()).skip(1).map(|(c, n)| c * c * n).sum();
    Some(TipSummary {
        mean_deflection: -coeffs[0],
        sd_deflection: var.sqrt(),
        euler_bernoulli: p.config.beam.euler_bernoulli_tip(p.config.beam.e0),
    })
}

pub fn summarize(p: &Pipeline, sol: &Solution, files: Vec<PathBuf>) -> RunResult {
    RunResult {
        config: p.config.clone(),
        preconditioner: sol.kind.to_string(),
        dimensions: dimensions(p, Some(sol)),
        kle: KleSummary {
            eigenvalues: p.kle.eigenvalues.clone(),
            relative_energy: p.kle.relative_energy(),
        },
        setup: p.timings,
        timings: sol.timings,
        solve: sol.report.clone(),
        regularized_subdomains: sol.regularized_subdomains,
        moments: moments(p, sol).summary(),
        tip: tip_summary(p, sol),
        files,
    }
}

/// Legacy VTK with partition, node classes, coefficient mean, moments and
/// the selected chaos coefficient fields.
pub fn write_vtk(path: &Path, p: &Pipeline, sol: &Solution) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    let title = format!("{} {}", p.config.problem, sol.kind);
    let mut vtk = VtkWriter::new(out, &title, p.mesh.nodes(), p.mesh.tets())?;
    let sub: Vec<f64> = p.partition.element_subdomain().iter().map(|&s| s as f64).collect();
    vtk.cell_scalars("subdomain", &sub)?;
    let codes: Vec<f64> = p.classes.classes().iter().map(|c| c.code() as f64).collect();
    vtk.point_scalars("node_class", &codes)?;
    vtk.point_scalars("coefficient_mean", p.problem.coefficient().mean())?;
    let m = moments(p, sol);
    let nc = p.components();
    let as_vectors = |v: &[f64]| -> Vec<[f64; 3]> { v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect() };
    if nc == 1 {
        vtk.point_scalars("mean", &m.mean)?;
        vtk.point_scalars("sd", &m.sd)?;
    } else {
        vtk.point_vectors("mean", &as_vectors(&m.mean))?;
        vtk.point_vectors("sd", &as_vectors(&m.sd))?;
        vtk.point_scalars("mean_magnitude", &m.mean_magnitude())?;
        vtk.point_scalars("sd_magnitude", &m.sd_magnitude())?;
    }
    for &j in &p.config.coefficient_fields {
        let Some(u) = sol.nodal.get(j) else {
            log::warn!("skipping chaos field u_{j}: only {} terms", sol.nodal.len());
            continue;
        };
        if nc == 1 {
            vtk.point_scalars(&format!("u_{j}"), u)?;
        } else {
            vtk.point_vectors(&format!("u_{j}"), &as_vectors(u))?;
        }
    }
    vtk.finish()?;
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Solves with the configured preconditioner and writes
/// `<output>.json`, `<output>.vtk` and `<output>.cfg` when an output
/// prefix is set.
pub fn run(config: RunConfig) -> Result<RunResult> {
    let pipeline = Pipeline::prepare(config)?;
    let sol = pipeline.solve(pipeline.config.preconditioner, pipeline.config.pcg_options())?;
    let mut files = Vec::new();
    if let Some(prefix) = &pipeline.config.output {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let cfg = with_suffix(prefix, ".cfg");
        std::fs::write(&cfg, pipeline.config.to_text())?;
        files.push(cfg);
        if pipeline.config.vtk {
            let vtk = with_suffix(prefix, ".vtk");
            write_vtk(&vtk, &pipeline, &sol)?;
            files.push(vtk);
        }
        let json = with_suffix(prefix, ".json");
        files.push(json.clone());
        let result = summarize(&pipeline, &sol, files);
        std::fs::write(&json, result.to_json()?)?;
        return Ok(result);
    }
    Ok(summarize(&pipeline, &sol, files))
}
