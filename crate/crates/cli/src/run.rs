//! Subcommand execution: build the problem from a validated configuration,
//! solve, check invariants and write artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fracmfg::coupling::CouplingError;
use fracmfg::field_io::{self, FieldIoError};
use fracmfg::fokker_planck::{self, FpError};
use fracmfg::hjb::{self, HjbError};
use fracmfg::mfg::{self, MfgError};
use fracmfg::variational::{self, VariationalError};
use fracmfg::{SpectralField, VectorField};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::acceptance;
use crate::config::{parse_config, RunConfig};
use crate::expr::Expr;
use crate::output::{resolve_output_dir, sha256_hex, ArtifactWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    FpSolve,
    HjbSolve,
    MfgSolve,
    MfgVariational,
    MfgProbeUniqueness,
    Acceptance,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::FpSolve => "fp-solve",
            Self::HjbSolve => "hjb-solve",
            Self::MfgSolve => "mfg-solve",
            Self::MfgVariational => "mfg-variational",
            Self::MfgProbeUniqueness => "mfg-probe-uniqueness",
            Self::Acceptance => "acceptance",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("[{stage}] {message}")]
    NonConvergence { stage: &'static str, message: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::NonConvergence { .. } => 3,
            Self::Invariant(_) => 4,
            Self::Io(_) => 1,
        }
    }
}

impl From<FieldIoError> for RunError {
    fn from(e: FieldIoError) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<CouplingError> for RunError {
    fn from(e: CouplingError) -> Self {
        match e {
            CouplingError::NegativeDensity { .. } => Self::Invariant(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<FpError> for RunError {
    fn from(e: FpError) -> Self {
        match e {
            FpError::NonConvergence { .. } => Self::NonConvergence {
                stage: "fp",
                message: e.to_string(),
            },
            FpError::NegativeDensity { .. } => Self::Invariant(format!("[fp] {e}")),
            _ => Self::Config(format!("[fp] {e}")),
        }
    }
}

impl From<HjbError> for RunError {
    fn from(e: HjbError) -> Self {
        match e {
            HjbError::NonConvergence { .. } | HjbError::BlowUp { .. } => Self::NonConvergence {
                stage: "hjb",
                message: e.to_string(),
            },
            _ => Self::Config(format!("[hjb] {e}")),
        }
    }
}

impl From<MfgError> for RunError {
    fn from(e: MfgError) -> Self {
        match &e {
            MfgError::NonConvergence { .. } | MfgError::Inner { non_convergence: true, .. } => {
                Self::NonConvergence {
                    stage: "mfg",
                    message: e.to_string(),
                }
            }
            MfgError::Positivity { .. } => Self::Invariant(format!("[mfg] {e}")),
            MfgError::Inner { .. } => Self::Invariant(format!("[mfg] {e}")),
            _ => Self::Config(format!("[mfg] {e}")),
        }
    }
}

impl From<VariationalError> for RunError {
    fn from(e: VariationalError) -> Self {
        match e {
            VariationalError::NonConvergence { .. } | VariationalError::InfiniteEnergy => Self::NonConvergence {
                stage: "variational",
                message: e.to_string(),
            },
            VariationalError::NonlocalCoupling => Self::Config(e.to_string()),
            _ => Self::Invariant(format!("[variational] {e}")),
        }
    }
}

fn sample(text: &str, grid: &fracmfg::PeriodicGrid) -> SpectralField {
    Expr::parse(text).expect("validated expression").sample(grid)
}

fn invariant(ok: bool, what: impl FnOnce() -> String) -> Result<(), RunError> {
    if ok {
        Ok(())
    } else {
        Err(RunError::Invariant(what()))
    }
}

/// Runs one subcommand, writing fields into `out` and returning the
/// deterministic diagnostics record.
pub fn run(cfg: &RunConfig, sub: Subcommand, out: &mut ArtifactWriter) -> Result<Value, RunError> {
    match sub {
        Subcommand::FpSolve => fp_solve(cfg, out),
        Subcommand::HjbSolve => hjb_solve(cfg, out),
        Subcommand::MfgSolve => mfg_solve(cfg, out),
        Subcommand::MfgVariational => mfg_variational(cfg, out),
        Subcommand::MfgProbeUniqueness => probe(cfg),
        Subcommand::Acceptance => {
            let report = acceptance::run_suite(cfg.seed);
            let value = serde_json::to_value(&report).expect("report serializes");
            if report.all_passed() {
                Ok(value)
            } else {
                let failed: Vec<String> = report.failed().map(|c| format!("{} {}", c.id, c.name)).collect();
                out.json("diagnostics.json", &value)?;
                Err(RunError::Invariant(format!("acceptance criteria failed: {}", failed.join(", "))))
            }
        }
    }
}

fn fp_solve(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<Value, RunError> {
    let grid = cfg.grid();
    let p = &cfg.problem;
    let drift = if p.drift.is_empty() {
        VectorField::zeros(&grid)
    } else {
        VectorField::new(p.drift.iter().map(|d| sample(d, &grid)).collect()).expect("same grid")
    };
    let sol = fokker_planck::solve_stationary_fp(&drift, p.s, &cfg.solver.fp)?;
    invariant(sol.m.coeffs()[0].re == 1.0, || "zero mode of m is not exactly 1".into())?;
    out.field("m", &sol.m)?;
    Ok(json!({
        "subcommand": "fp-solve",
        "s": p.s,
        "grid": {"dim": p.dim, "n": p.n},
        "residual": sol.residual,
        "iterations": sol.iterations,
        "min_m": sol.min_m,
        "max_m": sol.max_m,
        "mass": sol.m.mean(),
        "residual_history": sol.residual_history,
    }))
}

fn hjb_data(cfg: &RunConfig) -> Result<SpectralField, RunError> {
    let grid = cfg.grid();
    let p = &cfg.problem;
    if let Some(f) = &p.f {
        return Ok(sample(f, &grid));
    }
    let Some(stem) = &p.f_file else {
        return Err(RunError::Config("hjb-solve needs problem.f or problem.f_file".into()));
    };
    let (header, field) = field_io::read_field(stem).map_err(|e| RunError::Config(format!("problem.f_file: {e}")))?;
    if header.dim != p.dim || header.n != p.n {
        return Err(RunError::Config(format!(
            "problem.f_file is on a {}D grid with n = {}, expected {}D with n = {}",
            header.dim, header.n, p.dim, p.n
        )));
    }
    Ok(field)
}

fn hjb_solve(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<Value, RunError> {
    let f = hjb_data(cfg)?;
    let h = cfg.hamiltonian();
    let s = cfg.problem.s;
    let hcfg = cfg.solver.hjb;
    let sol = hjb::solve_ergodic(&f, &h, s, &hcfg)?;
    let (lo, hi) = hjb::lambda_bounds(&f, &h);
    invariant(sol.u.mean() == 0.0, || "u is not mean-zero".into())?;
    invariant(lo - hcfg.tol <= sol.lambda && sol.lambda <= hi + hcfg.tol, || {
        format!("lambda {} outside [{lo}, {hi}]", sol.lambda)
    })?;
    out.field("u", &sol.u)?;
    Ok(json!({
        "subcommand": "hjb-solve",
        "s": s,
        "grid": {"dim": cfg.problem.dim, "n": cfg.problem.n},
        "lambda": sol.lambda,
        "residual": sol.residual,
        "grad_norm": sol.grad_norm,
        "iterations": sol.steps,
        "newton_iterations": sol.newton_iterations,
        "lambda_bounds": [lo, hi],
        "gradient_report": hjb::gradient_estimate_diag(&sol, &f, &h, s),
    }))
}

fn solution_record(sol: &mfg::MfgSolution, problem: &mfg::MfgProblem) -> Result<Value, RunError> {
    let r = mfg::system_residual(sol, problem)?;
    Ok(json!({
        "lambda": sol.lambda,
        "residuals": r,
        "min_m": sol.m.min(),
        "max_m": sol.m.max(),
        "optimality": variational::optimality_check(sol, &problem.hamiltonian),
        "duality_gap": sol.diagnostics.duality_gap,
        "energy_value": sol.diagnostics.energy_value,
        "growth": problem.growth,
    }))
}

fn write_solution(sol: &mfg::MfgSolution, out: &mut ArtifactWriter) -> Result<(), RunError> {
    out.field("u", &sol.u)?;
    out.field("m", &sol.m)?;
    out.vector("w", &sol.w)
}

fn mfg_solve(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<Value, RunError> {
    let problem = cfg.problem()?;
    let sol = mfg::solve_fixed_point(&problem)?;
    let mut record = solution_record(&sol, &problem)?;
    let tol = problem.solver.tol_outer;
    let r = mfg::system_residual(&sol, &problem)?;
    invariant(sol.m.coeffs()[0].re == 1.0, || "zero mode of m is not exactly 1".into())?;
    invariant(sol.m.min() > 0.0, || format!("min m = {} is not positive", sol.m.min()))?;
    invariant(r.hjb <= tol && r.fp <= tol, || {
        format!("residuals {:e}/{:e} exceed tol_outer {tol:e}", r.hjb, r.fp)
    })?;
    write_solution(&sol, out)?;
    record["subcommand"] = json!("mfg-solve");
    record["outer_iterations"] = json!(sol.diagnostics.outer_iterations);
    record["stages"] = json!(sol.diagnostics.stages);
    record["sandwich_ok"] = json!(sol.diagnostics.sandwich_ok);
    Ok(record)
}

fn mfg_variational(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<Value, RunError> {
    let problem = cfg.problem()?;
    let var = variational::minimize_energy(&problem, &cfg.variational)?;
    let sol = var.to_mfg_solution(&problem)?;
    let constraint = var.pair.constraint_residual();
    invariant(constraint <= 1e-10 * (1.0 + var.pair.w.sup_norm()), || {
        format!("constraint residual {constraint:e}")
    })?;
    invariant(sol.m.min() > 0.0, || format!("min m = {} is not positive", sol.m.min()))?;
    let mut record = solution_record(&sol, &problem)?;
    write_solution(&sol, out)?;
    record["subcommand"] = json!("mfg-variational");
    record["energy_value"] = json!(var.energy);
    // λ from an independent ergodic solve with data f(·, m̄), against J(m̄, w̄)
    let data = problem.coupling.eval(&sol.m)?;
    let independent = hjb::solve_ergodic(&data, &problem.hamiltonian, problem.s, &cfg.solver.hjb)?;
    record["hjb_lambda"] = json!(independent.lambda);
    record["gap"] = json!((independent.lambda - var.lambda).abs());
    record["kinetic"] = json!(var.pair.kinetic);
    record["potential"] = json!(var.potential);
    record["gradient_norm"] = json!(var.gradient_norm);
    record["iterations"] = json!(var.iterations);
    record["constraint_residual"] = json!(constraint);
    Ok(record)
}

fn probe(cfg: &RunConfig) -> Result<Value, RunError> {
    let problem = cfg.problem()?;
    let seeds: Vec<SpectralField> = cfg.uniqueness.seeds.iter().map(|s| sample(s, &problem.grid)).collect();
    for (i, seed) in seeds.iter().enumerate() {
        if seed.min() < 0.0 || !(seed.mean() > 0.0) {
            return Err(RunError::Config(format!(
                "uniqueness.seeds[{i}] must be nonnegative with positive mass"
            )));
        }
    }
    let seeds: Vec<SpectralField> = seeds.iter().map(|m| m.scale(1.0 / m.mean())).collect();
    let report = mfg::uniqueness_probe(&problem, &seeds);
    Ok(json!({
        "subcommand": "mfg-probe-uniqueness",
        "seeds": cfg.uniqueness.seeds,
        "report": report,
    }))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    config_sha256: String,
    seed: u64,
    exit_code: i32,
    error: Option<String>,
    files: Vec<String>,
    timings_ms: Timings,
    warnings: &'a [String],
}

#[derive(Debug, Serialize)]
struct Timings {
    solve: f64,
    total: f64,
}

/// Outcome of a full invocation for one configuration file.
#[derive(Debug)]
pub struct Execution {
    pub exit_code: i32,
    pub output_dir: Option<PathBuf>,
    pub message: String,
    pub diagnostics: Option<Value>,
}

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub strict: bool,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Parse, run and write diagnostics plus manifest for one configuration.
pub fn execute(config_path: &Path, sub: Subcommand, opts: &Options) -> Execution {
    let start = Instant::now();
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            return Execution {
                exit_code: 2,
                output_dir: None,
                message: format!("cannot read {}: {e}", config_path.display()),
                diagnostics: None,
            }
        }
    };
    execute_text(&text, sub, opts, start)
}

pub fn execute_text(text: &str, sub: Subcommand, opts: &Options, start: Instant) -> Execution {
    let parsed = match parse_config(text, opts.strict) {
        Ok(p) => p,
        Err(e) => {
            return Execution {
                exit_code: 2,
                output_dir: None,
                message: e.to_string(),
                diagnostics: None,
            }
        }
    };
    let mut cfg = parsed.config;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let dir = resolve_output_dir(opts.output.as_deref().unwrap_or(&cfg.output.directory));
    let mut writer = match ArtifactWriter::new(dir.clone(), cfg.output.formats.clone(), cfg.output.precision) {
        Ok(w) => w,
        Err(e) => {
            return Execution {
                exit_code: e.exit_code(),
                output_dir: None,
                message: e.to_string(),
                diagnostics: None,
            }
        }
    };
    let solve_start = Instant::now();
    let result = run(&cfg, sub, &mut writer)
        .and_then(|diag| {
            writer.json("diagnostics.json", &diag)?;
            writer.verify_fields()?;
            Ok(diag)
        });
    let solve_ms = solve_start.elapsed().as_secs_f64() * 1e3;
    let (exit_code, error, diagnostics) = match result {
        Ok(d) => (0, None, Some(d)),
        Err(e) => (e.exit_code(), Some(e.to_string()), None),
    };
    let mut manifest = Manifest {
        tool: "fracmfg",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: sub.name(),
        config_sha256: sha256_hex(text.as_bytes()),
        seed: cfg.seed,
        exit_code,
        error: error.clone(),
        files: writer.files().to_vec(),
        timings_ms: Timings {
            solve: solve_ms,
            total: 0.0,
        },
        warnings: &parsed.warnings,
    };
    manifest.files.push("manifest.json".into());
    manifest.timings_ms.total = start.elapsed().as_secs_f64() * 1e3;
    let manifest_result = writer.json("manifest.json", &manifest);
    let (exit_code, message) = match (error, manifest_result) {
        (Some(e), _) => (exit_code, e),
        (None, Err(e)) => (e.exit_code(), e.to_string()),
        (None, Ok(())) => (0, format!("{} finished; artifacts in {}", sub.name(), dir.display())),
    };
    Execution {
        exit_code,
        output_dir: Some(dir),
        message,
        diagnostics,
    }
}
