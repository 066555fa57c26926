//! Flat `key = value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::youngs_from_lame;
use crate::krylov::PcgOptions;
use crate::mesh::DirichletFaces;
use crate::precond::PreconditionerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Poisson,
    Elasticity,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Poisson => "poisson",
            Self::Elasticity => "elasticity",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" | "diffusion" => Ok(Self::Poisson),
            "elasticity" | "beam" => Ok(Self::Elasticity),
            other => Err(Error::Config(format!("unknown problem '{other}'"))),
        }
    }
}

/// Scaled clamped-beam parameters. The beam spans `[0, 1] × [0, W] × [0, W]`
/// with `W = aspect`, clamped at `x = 0`, loaded by `(0, −ρg, 0)` with
/// `g = 0.4 · aspect²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    pub aspect: f64,
    pub nu: f64,
    pub e0: f64,
    pub rho: f64,
}

impl Default for BeamParams {
    fn default() -> Self {
        let (e0, nu) = youngs_from_lame(1.25, 1.0);
        Self { aspect: 0.2, nu, e0, rho: 1.0 }
    }
}

impl BeamParams {
    pub fn gravity(&self) -> f64 {
        0.4 * self.aspect * self.aspect
    }

    pub fn mu(&self) -> f64 {
        self.e0 / (2.0 * (1.0 + self.nu))
    }

    pub fn lambda(&self) -> f64 {
        self.e0 * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
    }

    /// Euler–Bernoulli tip deflection of the cantilever under its own
    /// weight at Young's modulus `e`: `q L⁴ / (8 E I)`.
    pub fn euler_bernoulli_tip(&self, e: f64) -> f64 {
        let w = self.aspect;
        let q = self.rho * self.gravity() * w * w;
        let inertia = w.powi(4) / 12.0;
        q / (8.0 * e * inertia)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub cells: [usize; 3],
    pub extents: [f64; 3],
    pub partition: [usize; 3],
    /// Number of KLE random variables `L`.
    pub l: usize,
    pub p_a: u32,
    pub p_u: u32,
    pub sigma: f64,
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
    pub preconditioner: PreconditionerKind,
    pub tol: f64,
    pub maxit: usize,
    /// Seeds random sign flips of the KLE eigenvectors; `None` keeps the
    /// eigensolver's signs.
    pub seed: Option<u64>,
    /// Poisson source term.
    pub forcing: f64,
    pub beam: BeamParams,
    /// PCE coefficient fields written to VTK.
    pub coefficient_fields: Vec<usize>,
    pub output: Option<PathBuf>,
    pub vtk: bool,
}

impl RunConfig {
    pub fn poisson() -> Self {
        Self {
            problem: ProblemKind::Poisson,
            cells: [6, 6, 6],
            extents: [1.0, 1.0, 1.0],
            partition: [2, 2, 2],
            l: 3,
            p_a: 2,
            p_u: 3,
            sigma: 0.3,
            bx: 1.0,
            by: 1.0,
            bz: 1.0,
            preconditioner: PreconditionerKind::Wirebasket,
            tol: 1e-5,
            maxit: 500,
            seed: None,
            forcing: 1.0,
            beam: BeamParams::default(),
            coefficient_fields: vec![1, 2, 4, 6],
            output: None,
            vtk: true,
        }
    }

    pub fn elasticity() -> Self {
        let beam = BeamParams::default();
        Self {
            problem: ProblemKind::Elasticity,
            extents: [1.0, beam.aspect, beam.aspect],
            beam,
            ..Self::poisson()
        }
    }

    pub fn defaults_for(problem: ProblemKind) -> Self {
        match problem {
            ProblemKind::Poisson => Self::poisson(),
            ProblemKind::Elasticity => Self::elasticity(),
        }
    }

    pub fn dirichlet(&self) -> DirichletFaces {
        match self.problem {
            ProblemKind::Poisson => DirichletFaces::All,
            ProblemKind::Elasticity => DirichletFaces::XMin,
        }
    }

    pub fn pcg_options(&self) -> PcgOptions {
        PcgOptions { tol: self.tol, maxit: self.maxit }
    }

    /// Parses `key = value` lines (`#` starts a comment), then applies
    /// `overrides` in order. The `problem` key, wherever it appears,
    /// selects the defaults the other keys modify.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        pairs.extend(overrides.iter().cloned());
        let problem = pairs
            .iter()
            .rev()
            .find(|(k, _)| k.eq_ignore_ascii_case("problem"))
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(ProblemKind::Poisson);
        let mut cfg = Self::defaults_for(problem);
        let mut extents_set = false;
        for (k, v) in &pairs {
            extents_set |= k.eq_ignore_ascii_case("extents");
            cfg.set(k, v)?;
        }
        if cfg.problem == ProblemKind::Elasticity && !extents_set {
            cfg.extents = [1.0, cfg.beam.aspect, cfg.beam.aspect];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, overrides)
    }

    /// Sets one key; `key` is case-insensitive and `-` equals `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").to_ascii_lowercase().replace('-', "_");
        let bad = |what: &str| Error::Config(format!("invalid value '{value}' for {key}: {what}"));
        match key.as_str() {
            "problem" => self.problem = value.parse()?,
            "cells" => self.cells = triple(value).map_err(|e| bad(&e))?,
            "extents" => self.extents = triple(value).map_err(|e| bad(&e))?,
            "partition" => self.partition = triple(value).map_err(|e| bad(&e))?,
            "l" => self.l = scalar(value).map_err(|e| bad(&e))?,
            "p_a" => self.p_a = scalar(value).map_err(|e| bad(&e))?,
            "p_u" => self.p_u = scalar(value).map_err(|e| bad(&e))?,
            "sigma" => self.sigma = scalar(value).map_err(|e| bad(&e))?,
            "b" => {
                let b: f64 = scalar(value).map_err(|e| bad(&e))?;
                (self.bx, self.by, self.bz) = (b, b, b);
            }
            "bx" => self.bx = scalar(value).map_err(|e| bad(&e))?,
            "by" => self.by = scalar(value).map_err(|e| bad(&e))?,
            "bz" => self.bz = scalar(value).map_err(|e| bad(&e))?,
            "preconditioner" => self.preconditioner = value.parse()?,
            "tol" => self.tol = scalar(value).map_err(|e| bad(&e))?,
            "maxit" => self.maxit = scalar(value).map_err(|e| bad(&e))?,
            "seed" => {
                self.seed = match value.trim().to_ascii_lowercase().as_str() {
                    "" | "none" => None,
                    v => Some(scalar(v).map_err(|e| bad(&e))?),
                }
            }
            "forcing" => self.forcing = scalar(value).map_err(|e| bad(&e))?,
            "aspect" => self.beam.aspect = scalar(value).map_err(|e| bad(&e))?,
            "nu" => self.beam.nu = scalar(value).map_err(|e| bad(&e))?,
            "e0" => self.beam.e0 = scalar(value).map_err(|e| bad(&e))?,
            "rho" => self.beam.rho = scalar(value).map_err(|e| bad(&e))?,
            "coefficient_fields" => {
                self.coefficient_fields = list(value).map_err(|e| bad(&e))?;
            }
            "output" => {
                self.output = match value.trim() {
                    "" | "none" => None,
                    v => Some(PathBuf::from(v)),
                }
            }
            "vtk" => self.vtk = scalar(value).map_err(|e| bad(&e))?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.tol > 0.0) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        for a in 0..3 {
            if self.cells[a] == 0 || self.partition[a] == 0 {
                return fail("cells and partition entries must be positive".into());
            }
            if self.cells[a] % self.partition[a] != 0 {
                return Err(Error::Divisibility {
                    axis: ['x', 'y', 'z'][a],
                    cells: self.cells[a],
                    parts: self.partition[a],
                });
            }
            if !(self.extents[a] > 0.0) {
                return fail(format!("extents must be positive, got {:?}", self.extents));
            }
        }
        if !(self.sigma >= 0.0) {
            return fail(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if self.problem == ProblemKind::Elasticity {
            let b = &self.beam;
            if !(b.nu > 0.0 && b.nu < 0.5) {
                return fail(format!("nu must lie in (0, 0.5), got {}", b.nu));
            }
            if !(b.e0 > 0.0 && b.aspect > 0.0 && b.rho >= 0.0) {
                return fail("beam needs e0 > 0, aspect > 0, rho >= 0".into());
            }
        }
        if self.p_a > self.p_u {
            log::warn!("p_a = {} exceeds p_u = {}", self.p_a, self.p_u);
        }
        Ok(())
    }

    /// Renders the configuration back into the text format.
    pub fn to_text(&self) -> String {
        let t = |v: [f64; 3]| format!("{},{},{}", v[0], v[1], v[2]);
        let u = |v: [usize; 3]| format!("{},{},{}", v[0], v[1], v[2]);
        let fields: Vec<String> = self.coefficient_fields.iter().map(|j| j.to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("problem", self.problem.to_string());
        kv("cells", u(self.cells));
        kv("extents", t(self.extents));
        kv("partition", u(self.partition));
        kv("L", self.l.to_string());
        kv("p_a", self.p_a.to_string());
        kv("p_u", self.p_u.to_string());
        kv("sigma", self.sigma.to_string());
        kv("bx", self.bx.to_string());
        kv("by", self.by.to_string());
        kv("bz", self.bz.to_string());
        kv("preconditioner", self.preconditioner.to_string());
        kv("tol", self.tol.to_string());
        kv("maxit", self.maxit.to_string());
        kv("seed", self.seed.map_or("none".into(), |s| s.to_string()));
        kv("forcing", self.forcing.to_string());
        kv("aspect", self.beam.aspect.to_string());
        kv("nu", self.beam.nu.to_string());
        kv("e0", self.beam.e0.to_string());
        kv("rho", self.beam.rho.to_string());
        kv("coefficient_fields", fields.join(","));
        kv("output", self.output.as_ref().map_or("none".into(), |p| p.display().to_string()));
        kv("vtk", self.vtk.to_string());
        s
    }
}

fn scalar<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.trim().parse().map_err(|_| "not a valid number or flag".to_string())
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split([',', ' ', 'x'])
        .filter(|s| !s.trim().is_empty())
        .map(scalar)
        .collect()
}

fn triple<T: FromStr + Copy>(v: &str) -> std::result::Result<[T; 3], String> {
    let items: Vec<T> = list(v)?;
    match items.as_slice() {
        [a] => Ok([*a; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err("expected one value or three".into()),
    }
}

/// Splits `--key=value` / `key=value` arguments.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    args.iter()
        .map(|a| {
            a.trim_start_matches("--")
                .split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Config(format!("override '{a}' is not of the form --key=value")))
        })
        .collect()
}
