//! Python bindings: configuration, the solve pipeline, moments, the dense
//! oracle and the chaos tensor.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ssdd::cli::{self, compute_moments, RunConfig};
use ssdd::krylov::PcgOptions;
use ssdd::oracle::{dense_solve, relative_l2};
use ssdd::pce::{basis_size, triple_products, PcBasis};
use ssdd::precond::PreconditionerKind;

fn err(e: ssdd::Error) -> PyErr {
    match e {
        ssdd::Error::Config(_) | ssdd::Error::Divisibility { .. } | ssdd::Error::DimensionCap { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn kind(name: &str) -> PyResult<PreconditionerKind> {
    name.parse().map_err(err)
}

/// Run configuration; keyword arguments override the problem defaults.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
pub struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (problem = "poisson", **overrides))]
    fn new(problem: &str, overrides: Option<std::collections::HashMap<String, Bound<'_, PyAny>>>) -> PyResult<Self> {
        let mut pairs = vec![("problem".to_string(), problem.to_string())];
        for (k, v) in overrides.unwrap_or_default() {
            pairs.push((k, value_text(&v)?));
        }
        Ok(Self { inner: RunConfig::parse("", &pairs).map_err(err)? })
    }

    /// Parses the `key = value` text format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: RunConfig::parse(text, &[]).map_err(err)? })
    }

    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        self.inner.set(key, &value_text(value)?).map_err(err)?;
        self.inner.validate().map_err(err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn problem(&self) -> String {
        self.inner.problem.to_string()
    }

    #[getter]
    fn cells(&self) -> [usize; 3] {
        self.inner.cells
    }

    #[getter]
    fn partition(&self) -> [usize; 3] {
        self.inner.partition
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(problem={}, cells={:?}, partition={:?}, L={}, p_u={})",
            self.inner.problem, self.inner.cells, self.inner.partition, self.inner.l, self.inner.p_u
        )
    }
}

/// Lists and tuples become comma-separated text, everything else `str()`.
fn value_text(v: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(items) = v.extract::<Vec<Bound<'_, PyAny>>>() {
        if !v.is_instance_of::<pyo3::types::PyString>() {
            let parts = items.iter().map(|i| Ok(i.str()?.to_string())).collect::<PyResult<Vec<_>>>()?;
            return Ok(parts.join(","));
        }
    }
    if let Ok(b) = v.extract::<bool>() {
        return Ok(b.to_string());
    }
    Ok(v.str()?.to_string())
}

/// Result of one preconditioned solve.
#[pyclass(name = "Solution", frozen)]
pub struct PySolution {
    #[pyo3(get)]
    preconditioner: String,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    condition_estimate: Option<f64>,
    #[pyo3(get)]
    relative_updates: Vec<f64>,
    #[pyo3(get)]
    coarse_dim: usize,
    /// Chaos coefficients, one nodal list per term.
    #[pyo3(get)]
    coefficients: Vec<Vec<f64>>,
    #[pyo3(get)]
    mean: Vec<f64>,
    #[pyo3(get)]
    sd: Vec<f64>,
}

/// Mesh, KLE, chaos tensor and assembled Schur system for one config.
#[pyclass(name = "Pipeline", frozen)]
pub struct PyPipeline {
    inner: Arc<cli::Pipeline>,
}

#[pymethods]
impl PyPipeline {
    #[new]
    fn new(py: Python<'_>, config: PyConfig) -> PyResult<Self> {
        let p = py.detach(|| cli::Pipeline::prepare(config.inner)).map_err(err)?;
        Ok(Self { inner: Arc::new(p) })
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.mesh.n_nodes()
    }

    #[getter]
    fn n_subdomains(&self) -> usize {
        self.inner.partition.n_subdomains()
    }

    #[getter]
    fn interface_dofs(&self) -> usize {
        self.inner.ctx.dim()
    }

    #[getter]
    fn pce_terms(&self) -> usize {
        self.inner.output_basis.len()
    }

    #[getter]
    fn kle_eigenvalues(&self) -> Vec<f64> {
        self.inner.kle.eigenvalues.clone()
    }

    #[getter]
    fn nodes(&self) -> Vec<[f64; 3]> {
        self.inner.mesh.nodes().to_vec()
    }

    #[pyo3(signature = (preconditioner = "wirebasket", tol = None, maxit = None))]
    fn solve(&self, py: Python<'_>, preconditioner: &str, tol: Option<f64>, maxit: Option<usize>) -> PyResult<PySolution> {
        let kind = kind(preconditioner)?;
        let mut opts = self.inner.config.pcg_options();
        opts.tol = tol.unwrap_or(opts.tol);
        opts.maxit = maxit.unwrap_or(opts.maxit);
        let p = self.inner.clone();
        let sol = py.detach(move || p.solve(kind, opts)).map_err(err)?;
        let m = compute_moments(&sol.nodal, self.inner.tensor.norms(), self.inner.components());
        Ok(PySolution {
            preconditioner: kind.to_string(),
            iterations: sol.report.iterations,
            converged: sol.report.converged,
            condition_estimate: sol.report.condition_estimate,
            relative_updates: sol.report.relative_updates,
            coarse_dim: sol.coarse_dim,
            coefficients: sol.nodal,
            mean: m.mean,
            sd: m.sd,
        })
    }

    /// Relative L2 distance between a solve and the dense global solve.
    #[pyo3(signature = (preconditioner = "wirebasket", tol = 1e-10))]
    fn oracle_error(&self, py: Python<'_>, preconditioner: &str, tol: f64) -> PyResult<f64> {
        let kind = kind(preconditioner)?;
        let p = self.inner.clone();
        py.detach(move || {
            let dense = dense_solve(&p.mesh, &p.problem, &p.tensor)?.to_nodal(p.mesh.n_nodes()).concat();
            let sol = p.solve(kind, PcgOptions { tol, maxit: p.config.maxit })?;
            Ok(relative_l2(&sol.nodal.concat(), &dense))
        })
        .map_err(err)
    }
}

/// Runs a full solve with file output as configured; returns results JSON.
#[pyfunction]
fn run(py: Python<'_>, config: PyConfig) -> PyResult<String> {
    py.detach(|| cli::run(config.inner)?.to_json()).map_err(err)
}

/// Number of chaos terms of total degree at most `order` in `dim` variables.
#[pyfunction]
fn chaos_terms(dim: usize, order: u32) -> usize {
    basis_size(dim, order)
}

/// Nonzero `(i, j, k, <ψ_i ψ_j ψ_k>)` entries.
#[pyfunction]
fn triple_product_entries(dim: usize, p_a: u32, p_u: u32) -> PyResult<Vec<(usize, usize, usize, f64)>> {
    let t = triple_products(&PcBasis::enumerate(dim, p_a), &PcBasis::enumerate(dim, p_u)).map_err(err)?;
    Ok(t.entries().iter().map(|e| (e.i, e.j, e.k, e.value)).collect())
}

#[pymodule]
pub fn ssdd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyPipeline>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(chaos_terms, m)?)?;
    m.add_function(wrap_pyfunction!(triple_product_entries, m)?)?;
    m.add("PRECONDITIONERS", PreconditionerKind::ALL.map(|k| k.to_string()).to_vec())?;
    Ok(())
}
