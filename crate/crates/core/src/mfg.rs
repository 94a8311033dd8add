//! The coupled system: the map `T: m ↦ μ` (HJB with data `f(·, m)`, then
//! Fokker–Planck with the optimal drift), its damped fixed-point iteration
//! with mollifier continuation, residual certification and a uniqueness
//! probe across seeds.

use std::thread;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{Coupling, CouplingError};
use crate::field::{SpectralField, VectorField};
use crate::fokker_planck::{self, FpConfig, FpError};
use crate::grid::PeriodicGrid;
use crate::growth::{validate_growth, GrowthReport};
use crate::hamiltonian::Hamiltonian;
use crate::hjb::{self, ErgodicSolution, HjbConfig, HjbError};
use crate::spectral::SpectralError;
use crate::variational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Hjb,
    Fp,
}

#[derive(Debug, Error)]
pub enum MfgError {
    #[error("fractional order must lie in (1/2, 1), got {0}")]
    Order(f64),
    #[error("parameters violate the growth regime: {}", describe_failures(.0))]
    Growth(GrowthReport),
    #[error("{0}")]
    InvalidParameter(String),
    #[error("{stage:?} solve failed at eps = {eps}: {message}")]
    Inner { stage: Stage, eps: f64, message: String, non_convergence: bool },
    #[error("fixed-point iteration did not converge at eps = {eps} (last residual {last:e})",
        last = history.last().and_then(|s| s.residual_history.last()).copied().unwrap_or(f64::NAN))]
    NonConvergence { eps: f64, history: Vec<StageRecord> },
    #[error("density lost positivity at eps = {eps} (min m = {min:e})")]
    Positivity { eps: f64, min: f64 },
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn describe_failures(report: &GrowthReport) -> String {
    report
        .failures()
        .map(|c| format!("{} ({})", c.condition.label(), c.detail))
        .collect::<Vec<_>>()
        .join("; ")
}

/// What to do when an unbounded local coupling falls outside the growth
/// regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimePolicy {
    #[default]
    Strict,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub damping: f64,
    pub max_outer: usize,
    pub tol_outer: f64,
    /// Mollifier widths in torus-length units, decreasing to 0.
    pub eps_schedule: Vec<f64>,
    /// Residual target on every stage except the last.
    pub stage_tol: f64,
    pub fp: FpConfig,
    pub hjb: HjbConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_outer: 200,
            tol_outer: 1e-8,
            eps_schedule: vec![0.1, 0.05, 0.02, 0.01, 0.0],
            stage_tol: 1e-4,
            fp: FpConfig::default(),
            hjb: HjbConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), MfgError> {
        let bad = |msg: String| Err(MfgError::InvalidParameter(msg));
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if !(self.tol_outer > 0.0) || !(self.stage_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_outer == 0 {
            return bad("max_outer must be at least 1".into());
        }
        if self.eps_schedule.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return bad("mollifier widths must be finite and nonnegative".into());
        }
        if self.eps_schedule.windows(2).any(|w| w[1] > w[0]) {
            return bad("eps_schedule must be non-increasing".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MfgProblem {
    pub s: f64,
    pub hamiltonian: Hamiltonian,
    pub coupling: Coupling,
    pub grid: PeriodicGrid,
    pub solver: SolverConfig,
    /// Growth checks, present for unbounded local couplings.
    pub growth: Option<GrowthReport>,
}

impl MfgProblem {
    pub fn new(
        s: f64,
        hamiltonian: Hamiltonian,
        coupling: Coupling,
        grid: PeriodicGrid,
        solver: SolverConfig,
        policy: RegimePolicy,
    ) -> Result<Self, MfgError> {
        if !(s > 0.5 && s < 1.0) {
            return Err(MfgError::Order(s));
        }
        solver.validate()?;
        let probe = SpectralField::zeros(&grid);
        match &coupling {
            Coupling::Local(c) => {
                if let Some(v) = c.potential() {
                    probe.ensure_same_grid(v)?;
                }
            }
            Coupling::Nonlocal(c) => probe.ensure_same_grid(c.kernel())?,
        }
        let growth = match &coupling {
            Coupling::Local(c) if !c.is_bounded() => {
                Some(validate_growth(s, hamiltonian.gamma(), c.q(), grid.dim()))
            }
            _ => None,
        };
        if policy == RegimePolicy::Strict {
            if let Some(report) = growth.as_ref().filter(|r| !r.passed()) {
                return Err(MfgError::Growth(report.clone()));
            }
        }
        Ok(Self {
            s,
            hamiltonian,
            coupling,
            grid,
            solver,
            growth,
        })
    }

    /// Widths actually used: the schedule for local couplings (ending at 0),
    /// a single unregularized stage for nonlocal ones.
    pub fn stages(&self) -> Vec<f64> {
        match self.coupling {
            Coupling::Local(_) => {
                let mut eps = self.solver.eps_schedule.clone();
                if eps.last() != Some(&0.0) {
                    eps.push(0.0);
                }
                eps
            }
            Coupling::Nonlocal(_) => vec![0.0],
        }
    }
}

/// Everything `T` computes on the way from `m` to `μ`.
#[derive(Debug, Clone)]
pub struct SchauderImage {
    pub mu: SpectralField,
    pub f: SpectralField,
    pub hjb: ErgodicSolution,
    /// Fokker–Planck drift `-∇H(∇u)`.
    pub drift: VectorField,
}

fn inner_error(stage: Stage, eps: f64, non_convergence: bool, message: String) -> MfgError {
    MfgError::Inner {
        stage,
        eps,
        message,
        non_convergence,
    }
}

fn hjb_config(problem: &MfgProblem, tol: f64) -> HjbConfig {
    let mut cfg = problem.solver.hjb;
    cfg.tol = cfg.tol.min(0.1 * tol);
    cfg
}

fn fp_config(problem: &MfgProblem, tol: f64) -> FpConfig {
    let mut cfg = problem.solver.fp;
    cfg.tol = cfg.tol.min(0.1 * tol);
    cfg
}

fn optimal_drift(h: &Hamiltonian, u: &SpectralField) -> VectorField {
    h.grad_field(&crate::spectral::gradient(u)).scale(-1.0)
}

fn schauder_step(
    problem: &MfgProblem,
    m: &SpectralField,
    eps: f64,
    tol: f64,
    warm_u: Option<&SpectralField>,
    warm_mu: Option<&SpectralField>,
) -> Result<SchauderImage, MfgError> {
    let f = problem.coupling.eval_regularized(m, eps)?;
    let hjb = hjb::solve_ergodic_from(&f, &problem.hamiltonian, problem.s, &hjb_config(problem, tol), warm_u)
        .map_err(|e| {
            let nc = matches!(e, HjbError::NonConvergence { .. } | HjbError::BlowUp { .. });
            inner_error(Stage::Hjb, eps, nc, e.to_string())
        })?;
    let drift = optimal_drift(&problem.hamiltonian, &hjb.u);
    let fp = fokker_planck::solve_stationary_fp_from(&drift, problem.s, &fp_config(problem, tol), warm_mu)
        .map_err(|e| {
            let nc = matches!(e, FpError::NonConvergence { .. });
            inner_error(Stage::Fp, eps, nc, e.to_string())
        })?;
    Ok(SchauderImage {
        mu: fp.m,
        f,
        hjb,
        drift,
    })
}

/// `T(m)`: mollified (local, `eps > 0`) or direct coupling, ergodic HJB,
/// then the stationary Fokker–Planck equation with drift `-∇H(∇u)`.
pub fn schauder_map(problem: &MfgProblem, m: &SpectralField, eps: f64) -> Result<SchauderImage, MfgError> {
    check_density(m, problem.solver.fp.pos_tol, eps)?;
    schauder_step(problem, m, eps, problem.solver.tol_outer, None, None)
}

fn check_density(m: &SpectralField, pos_tol: f64, eps: f64) -> Result<(), MfgError> {
    m.ensure_finite()?;
    if m.min() < -pos_tol {
        return Err(MfgError::Positivity { eps, min: m.min() });
    }
    Ok(())
}

/// Per-stage record of the outer iteration.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub eps: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub lambda_history: Vec<f64>,
    /// `min f - H(0) ≤ λ ≤ max f - H(0) + tol` at each iterate.
    pub sandwich: Vec<bool>,
    /// `‖m_ε - m_previous stage‖∞`.
    pub change_from_previous: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MfgDiagnostics {
    pub hjb_residual: f64,
    pub fp_residual: f64,
    pub mass_error: f64,
    pub outer_iterations: usize,
    pub stages: Vec<StageRecord>,
    pub sandwich_ok: bool,
    pub duality_gap: Option<f64>,
    pub energy_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MfgSolution {
    pub u: SpectralField,
    pub lambda: f64,
    pub m: SpectralField,
    /// `-m∇H(∇u)`.
    pub w: VectorField,
    pub diagnostics: MfgDiagnostics,
}

/// Rebuilds `m` with its zero mode set to exactly 1.
fn unit_mass(m: &SpectralField) -> SpectralField {
    let mut c = m.coeffs().to_vec();
    c[0] = Complex64::new(1.0, 0.0);
    SpectralField::from_coeffs(m.grid(), c)
}

pub fn solve_fixed_point(problem: &MfgProblem) -> Result<MfgSolution, MfgError> {
    solve_fixed_point_from(problem, &SpectralField::constant(&problem.grid, 1.0))
}

/// Damped iteration `m ← (1-τ)m + τT(m)` along the mollifier schedule,
/// started from `seed` (rescaled to unit mass).
pub fn solve_fixed_point_from(problem: &MfgProblem, seed: &SpectralField) -> Result<MfgSolution, MfgError> {
    seed.ensure_same_grid(&SpectralField::zeros(&problem.grid))?;
    seed.ensure_finite()?;
    if seed.min() < 0.0 || !(seed.mean() > 0.0) {
        return Err(MfgError::InvalidParameter(
            "seed density must be nonnegative with positive mass".into(),
        ));
    }
    let tau = problem.solver.damping;
    let pos_tol = problem.solver.fp.pos_tol;
    let h0 = problem.hamiltonian.eval(&[0.0]);
    let stages = problem.stages();
    let mut m = unit_mass(&seed.scale(1.0 / seed.mean()));
    let mut records: Vec<StageRecord> = Vec::new();
    let mut warm_u: Option<SpectralField> = None;
    let mut warm_mu: Option<SpectralField> = None;
    let mut total = 0;
    let mut last: Option<(SchauderImage, f64)> = None;

    for (k, &eps) in stages.iter().enumerate() {
        let final_stage = k + 1 == stages.len();
        let tol = if final_stage {
            problem.solver.tol_outer
        } else {
            problem.solver.stage_tol.max(problem.solver.tol_outer)
        };
        let stage_start = m.clone();
        let mut record = StageRecord {
            eps,
            iterations: 0,
            residual_history: Vec::new(),
            lambda_history: Vec::new(),
            sandwich: Vec::new(),
            change_from_previous: None,
        };
        let mut converged = false;
        for _ in 0..problem.solver.max_outer {
            check_density(&m, pos_tol, eps)?;
            let image = schauder_step(problem, &m, eps, tol, warm_u.as_ref(), warm_mu.as_ref())?;
            let fp_res = fokker_planck::fp_residual_with(&m, &image.drift, problem.s, problem.solver.fp.dealias);
            let residual = image.hjb.residual.max(fp_res);
            let lambda = image.hjb.lambda;
            record.iterations += 1;
            total += 1;
            record.residual_history.push(residual);
            record.lambda_history.push(lambda);
            record
                .sandwich
                .push(image.f.min() - h0 <= lambda && lambda <= image.f.max() - h0 + tol);
            warm_u = Some(image.hjb.u.clone());
            warm_mu = Some(image.mu.clone());
            if residual <= tol {
                converged = true;
                last = Some((image, fp_res));
                break;
            }
            if !residual.is_finite() {
                break;
            }
            m = unit_mass(&m.lincomb(1.0 - tau, &image.mu, tau));
        }
        record.change_from_previous = (k > 0).then(|| m.max_abs_diff(&stage_start));
        records.push(record);
        if !converged {
            return Err(MfgError::NonConvergence { eps, history: records });
        }
    }

    let (image, fp_res) = last.expect("at least one stage ran");
    if m.min() <= 0.0 {
        return Err(MfgError::Positivity {
            eps: 0.0,
            min: m.min(),
        });
    }
    let w = image.drift.mul_scalar_field(&m);
    let sandwich_ok = records.iter().all(|r| r.sandwich.iter().all(|&b| b));
    let mut sol = MfgSolution {
        u: image.hjb.u,
        lambda: image.hjb.lambda,
        m,
        w,
        diagnostics: MfgDiagnostics {
            hjb_residual: image.hjb.residual,
            fp_residual: fp_res,
            mass_error: 0.0,
            outer_iterations: total,
            stages: records,
            sandwich_ok,
            duality_gap: None,
            energy_value: None,
        },
    };
    sol.diagnostics.mass_error = (sol.m.mean() - 1.0).abs();
    if let Coupling::Local(c) = &problem.coupling {
        sol.diagnostics.duality_gap = Some(variational::duality_gap(&sol, c, &problem.hamiltonian));
        let pair = variational::FlowPair::new(sol.m.clone(), sol.w.clone(), problem.s, &problem.hamiltonian);
        sol.diagnostics.energy_value = variational::energy(&pair, &problem.hamiltonian, c).ok();
    }
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemResidual {
    pub hjb: f64,
    pub fp: f64,
    pub mass: f64,
}

/// Recomputes both PDE residuals against the unregularized coupling, and
/// `|c₀(m) - 1|`.
pub fn system_residual(sol: &MfgSolution, problem: &MfgProblem) -> Result<SystemResidual, MfgError> {
    let f = problem.coupling.eval(&sol.m)?;
    let hjb = hjb::hjb_residual(&sol.u, sol.lambda, &f, &problem.hamiltonian, problem.s, problem.solver.hjb.dealias);
    let drift = optimal_drift(&problem.hamiltonian, &sol.u);
    let fp = fokker_planck::fp_residual_with(&sol.m, &drift, problem.s, problem.solver.fp.dealias);
    Ok(SystemResidual {
        hjb,
        fp,
        mass: (sol.m.mean() - 1.0).abs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedOutcome {
    pub converged: bool,
    pub lambda: Option<f64>,
    pub error: Option<String>,
    pub outer_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub seeds: Vec<SeedOutcome>,
    pub max_m_distance: f64,
    pub max_lambda_distance: f64,
    pub max_u_distance: f64,
    pub monotone: bool,
    pub flags: Vec<String>,
}

/// Solves from every seed concurrently and reports the largest pairwise
/// distances between converged solutions.
pub fn uniqueness_probe(problem: &MfgProblem, seeds: &[SpectralField]) -> UniquenessReport {
    let results: Vec<Result<MfgSolution, MfgError>> = thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|seed| scope.spawn(move || solve_fixed_point_from(problem, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    let monotone = problem.coupling.is_monotone();
    let mut flags = Vec::new();
    if !monotone {
        flags.push("monotonicity hypothesis not met".to_string());
    }
    let solved: Vec<&MfgSolution> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let (mut dm, mut dl, mut du) = (0.0f64, 0.0f64, 0.0f64);
    for (i, a) in solved.iter().enumerate() {
        for b in &solved[i + 1..] {
            dm = dm.max(a.m.max_abs_diff(&b.m));
            dl = dl.max((a.lambda - b.lambda).abs());
            du = du.max(a.u.max_abs_diff(&b.u));
        }
    }
    if solved.len() < results.len() {
        flags.push(format!("{} of {} seeds failed to converge", results.len() - solved.len(), results.len()));
    }
    let tol = problem.solver.tol_outer;
    if dm > 10.0 * tol || dl > 10.0 * tol {
        flags.push("seeds converged to different solutions".to_string());
    }
    let seeds = results
        .iter()
        .map(|r| match r {
            Ok(sol) => SeedOutcome {
                converged: true,
                lambda: Some(sol.lambda),
                error: None,
                outer_iterations: sol.diagnostics.outer_iterations,
            },
            Err(e) => SeedOutcome {
                converged: false,
                lambda: None,
                error: Some(e.to_string()),
                outer_iterations: 0,
            },
        })
        .collect();
    UniquenessReport {
        seeds,
        max_m_distance: dm,
        max_lambda_distance: dl,
        max_u_distance: du,
        monotone,
        flags,
    }
}
