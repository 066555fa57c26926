use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssdd::cli::{custom_points, oracle_check, parse_overrides, run, run_sweep, Preset, RunConfig};
use ssdd::precond::PreconditionerKind;
use ssdd::{Error, Result};

/// Domain-decomposition solvers for stochastic Galerkin Poisson and
/// elasticity problems.
#[derive(Parser)]
#[command(name = "ssdd", version)]
struct Cli {
    /// Worker threads; overrides SSDD_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Problem used when no config file is given.
    #[arg(long, default_value = "poisson")]
    problem: String,
    /// Overrides of the form `--key=value`, applied after the file.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut overrides = vec![("problem".to_string(), self.problem.clone())];
        let text = match &self.config {
            Some(path) => {
                overrides.clear();
                std::fs::read_to_string(path)?
            }
            None => String::new(),
        };
        overrides.extend(parse_overrides(&self.overrides)?);
        RunConfig::parse(&text, &overrides)
    }
}

fn parse_kinds(s: &str) -> Result<Vec<PreconditionerKind>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(PreconditionerKind::ALL.to_vec());
    }
    s.split(',').map(|k| k.parse()).collect()
}

#[derive(Subcommand)]
enum Command {
    /// Solve once and write results JSON and VTK fields.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Vary one axis and write a CSV row per point and preconditioner.
    Sweep {
        /// mesh, weak, subdomains, rvs or order.
        #[arg(long, conflicts_with = "axis")]
        preset: Option<String>,
        /// Config key to vary instead of a preset.
        #[arg(long, requires = "values")]
        axis: Option<String>,
        /// `;`-separated values for `--axis`.
        #[arg(long)]
        values: Option<String>,
        /// Comma-separated preconditioners, or `all`.
        #[arg(long, default_value = "all")]
        preconditioners: String,
        #[arg(short, long, default_value = "sweep.csv")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compare the decomposed solve with a dense global solve.
    OracleCheck {
        #[arg(long, default_value = "all")]
        preconditioners: String,
        /// Largest accepted relative L2 error.
        #[arg(long, default_value_t = 1e-8)]
        threshold: f64,
        /// PCGM tolerance used for the comparison.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { cfg } => {
            let result = run(cfg.load()?)?;
            println!("{}", result.to_json()?);
            Ok(result.solve.converged)
        }
        Command::Sweep { preset, axis, values, preconditioners, out, cfg } => {
            let base = cfg.load()?;
            let kinds = parse_kinds(&preconditioners)?;
            let (name, axis, points) = match (preset, axis) {
                (Some(p), _) => {
                    let p: Preset = p.parse()?;
                    (p.to_string(), p.axis().to_string(), p.points(&base))
                }
                (None, Some(axis)) => {
                    let points = custom_points(&axis, values.as_deref().unwrap_or(""));
                    ("custom".to_string(), axis, points)
                }
                (None, None) => return Err(Error::Config("sweep needs --preset or --axis".into())),
            };
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let rows = run_sweep(&name, &axis, &base, &points, &kinds, File::create(&out)?)?;
            let failed = rows.iter().filter(|r| r.status == "failed").count();
            println!("wrote {} rows to {} ({failed} failed)", rows.len(), out.display());
            Ok(true)
        }
        Command::OracleCheck { preconditioners, threshold, tol, cfg } => {
            let config = cfg.load()?;
            let opts = ssdd::krylov::PcgOptions { tol, maxit: config.maxit };
            let checks = oracle_check(config, &parse_kinds(&preconditioners)?, opts, threshold)?;
            for c in &checks {
                println!(
                    "{:<10} iterations {:>4}  relative error {:.3e}  {}",
                    c.preconditioner,
                    c.iterations,
                    c.relative_error,
                    if c.passed { "PASS" } else { "FAIL" }
                );
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("SSDD_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("solver did not meet its target");
            ExitCode::from(2)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
