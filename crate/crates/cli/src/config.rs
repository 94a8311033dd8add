//! TOML run configuration, parsed with defaults and validated in one pass so
//! that every violation is reported together.

use std::path::PathBuf;

use fracmfg::coupling::{Coupling, LocalCoupling, NonlocalCoupling, OuterMap};
use fracmfg::growth::validate_growth;
use fracmfg::hamiltonian::Hamiltonian;
use fracmfg::mfg::{MfgProblem, RegimePolicy, SolverConfig};
use fracmfg::variational::VariationalConfig;
use fracmfg::PeriodicGrid;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Seed for every randomized probe.
    pub seed: u64,
    pub problem: ProblemSection,
    pub solver: SolverConfig,
    pub variational: VariationalConfig,
    pub uniqueness: UniquenessSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            problem: ProblemSection::default(),
            solver: SolverConfig::default(),
            variational: VariationalConfig::default(),
            uniqueness: UniquenessSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemSection {
    pub s: f64,
    pub dim: usize,
    pub n: usize,
    /// `strict` rejects parameters outside the growth regime, `report` only
    /// records the failed checks.
    pub regime: RegimePolicy,
    pub hamiltonian: HamiltonianSection,
    pub coupling: CouplingSection,
    /// Fokker–Planck drift, one expression per axis (empty means zero).
    pub drift: Vec<String>,
    /// HJB data as an expression ...
    pub f: Option<String>,
    /// ... or as a field file stem.
    pub f_file: Option<PathBuf>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            s: 0.75,
            dim: 1,
            n: 64,
            regime: RegimePolicy::Strict,
            hamiltonian: HamiltonianSection::default(),
            coupling: CouplingSection::default(),
            drift: Vec::new(),
            f: None,
            f_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HamiltonianSection {
    pub gamma: f64,
    /// Defaults to `1/gamma`.
    pub coeff: Option<f64>,
    pub smoothing_delta: f64,
}

impl Default for HamiltonianSection {
    fn default() -> Self {
        Self {
            gamma: 1.5,
            coeff: None,
            smoothing_delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    Local,
    Nonlocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OuterKind {
    Affine,
    Saturating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingSection {
    pub kind: CouplingKind,
    pub c: f64,
    pub q: f64,
    pub potential: Option<String>,
    pub saturation: Option<f64>,
    pub kernel_width: f64,
    pub outer: OuterKind,
    pub slope: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub scale: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            kind: CouplingKind::Local,
            c: 1.0,
            q: 1.5,
            potential: None,
            saturation: None,
            kernel_width: 0.05,
            outer: OuterKind::Affine,
            slope: 1.0,
            offset: 0.0,
            amplitude: 1.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UniquenessSection {
    /// Initial densities, rescaled to unit mass before use.
    pub seeds: Vec<String>,
}

impl Default for UniquenessSection {
    fn default() -> Self {
        Self {
            seeds: vec!["1".into(), "1 + 0.3*cos(1)".into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    FieldBinary,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
    /// Significant digits in CSV output.
    pub precision: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::FieldBinary],
            precision: 17,
        }
    }
}

#[derive(Debug, Error)]
#[error("invalid configuration:\n  {}", violations.join("\n  "))]
pub struct ConfigError {
    pub violations: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub config: RunConfig,
    /// Unknown keys outside strict mode, and growth checks that failed under
    /// `regime = "report"`.
    pub warnings: Vec<String>,
}

/// Parses and validates; in strict mode unknown keys are violations,
/// otherwise warnings.
pub fn parse_config(text: &str, strict: bool) -> Result<Parsed, ConfigError> {
    let mut unknown = Vec::new();
    let de = toml::Deserializer::new(text);
    let config: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string())).map_err(|e| {
        ConfigError {
            violations: vec![format!("malformed configuration: {}", e.to_string().trim())],
        }
    })?;
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    for key in unknown {
        if strict {
            violations.push(format!("unknown key `{key}`"));
        } else {
            warnings.push(format!("ignoring unknown key `{key}`"));
        }
    }
    validate(&config, &mut violations, &mut warnings);
    if violations.is_empty() {
        Ok(Parsed { config, warnings })
    } else {
        Err(ConfigError { violations })
    }
}

fn check_expr(key: &str, text: &str, dim: usize, violations: &mut Vec<String>) {
    match Expr::parse(text) {
        Ok(e) if e.min_dim() > dim => violations.push(format!(
            "{key}: expression uses {} axes but dim = {dim}",
            e.min_dim()
        )),
        Ok(_) => {}
        Err(e) => violations.push(format!("{key}: {e}")),
    }
}

fn validate(cfg: &RunConfig, violations: &mut Vec<String>, warnings: &mut Vec<String>) {
    let p = &cfg.problem;
    if !(p.s > 0.5 && p.s < 1.0) {
        violations.push(format!("problem.s: s must lie in (1/2, 1), got {}", p.s));
    }
    if let Err(e) = PeriodicGrid::new(p.dim, p.n) {
        violations.push(format!("problem.dim/n: {e}"));
    }
    if let Err(e) = hamiltonian(p) {
        violations.push(format!("problem.hamiltonian: {e}"));
    }
    let c = &p.coupling;
    if c.kind == CouplingKind::Local {
        if !(c.q > 1.0) {
            violations.push(format!("problem.coupling.q: growth exponent must exceed 1, got {}", c.q));
        }
        if let Some(m) = c.saturation {
            if !(m > 0.0) {
                violations.push(format!("problem.coupling.saturation: must be positive, got {m}"));
            }
        }
        let bounded = c.saturation.is_some() || c.c == 0.0;
        if !bounded && p.s > 0.5 && p.s < 1.0 && p.hamiltonian.gamma > 1.0 && c.q > 1.0 {
            let report = validate_growth(p.s, p.hamiltonian.gamma, c.q, p.dim);
            for check in report.failures() {
                let msg = format!("{}: {}", check.condition.label(), check.detail);
                match p.regime {
                    RegimePolicy::Strict => violations.push(msg),
                    RegimePolicy::Report => warnings.push(msg),
                }
            }
        }
    } else {
        if !(c.kernel_width > 0.0) {
            violations.push(format!("problem.coupling.kernel_width: must be positive, got {}", c.kernel_width));
        }
        if c.outer == OuterKind::Saturating && !(c.scale > 0.0) {
            violations.push(format!("problem.coupling.scale: must be positive, got {}", c.scale));
        }
    }
    if let Some(v) = &c.potential {
        check_expr("problem.coupling.potential", v, p.dim, violations);
    }
    if !p.drift.is_empty() && p.drift.len() != p.dim {
        violations.push(format!(
            "problem.drift: expected {} components, got {}",
            p.dim,
            p.drift.len()
        ));
    }
    for (i, d) in p.drift.iter().enumerate() {
        check_expr(&format!("problem.drift[{i}]"), d, p.dim, violations);
    }
    if let Some(f) = &p.f {
        check_expr("problem.f", f, p.dim, violations);
    }
    if p.f.is_some() && p.f_file.is_some() {
        violations.push("problem.f and problem.f_file are mutually exclusive".into());
    }
    for (i, s) in cfg.uniqueness.seeds.iter().enumerate() {
        check_expr(&format!("uniqueness.seeds[{i}]"), s, p.dim, violations);
    }
    if let Err(e) = cfg.solver.validate() {
        violations.push(format!("solver: {e}"));
    }
    let inner = [
        ("solver.fp.tol", cfg.solver.fp.tol),
        ("solver.hjb.tol", cfg.solver.hjb.tol),
        ("variational.gtol", cfg.variational.gtol),
    ];
    for (key, v) in inner {
        if !(v > 0.0) {
            violations.push(format!("{key}: must be positive, got {v}"));
        }
    }
    if !(cfg.solver.fp.damping > 0.0 && cfg.solver.fp.damping <= 1.0) {
        violations.push(format!("solver.fp.damping: must lie in (0, 1], got {}", cfg.solver.fp.damping));
    }
    if !(cfg.variational.clamp > 0.0) {
        violations.push(format!("variational.clamp: must be positive, got {}", cfg.variational.clamp));
    }
    if cfg.output.precision == 0 || cfg.output.precision > 17 {
        violations.push(format!("output.precision: must lie in 1..=17, got {}", cfg.output.precision));
    }
}

fn hamiltonian(p: &ProblemSection) -> Result<Hamiltonian, fracmfg::hamiltonian::HamiltonianError> {
    let h = &p.hamiltonian;
    let coeff = h.coeff.unwrap_or(1.0 / h.gamma);
    Hamiltonian::new(h.gamma, coeff, h.smoothing_delta)
}

/// Objects built from a validated configuration.
impl RunConfig {
    pub fn grid(&self) -> PeriodicGrid {
        PeriodicGrid::new(self.problem.dim, self.problem.n).expect("validated grid")
    }

    pub fn hamiltonian(&self) -> Hamiltonian {
        hamiltonian(&self.problem).expect("validated Hamiltonian")
    }

    pub fn coupling(&self, grid: &PeriodicGrid) -> Result<Coupling, fracmfg::coupling::CouplingError> {
        let c = &self.problem.coupling;
        let potential = c.potential.as_ref().map(|v| Expr::parse(v).expect("validated expression").sample(grid));
        Ok(match c.kind {
            CouplingKind::Local => {
                let mut f = LocalCoupling::new(c.c, c.q)?;
                if let Some(v) = potential {
                    f = f.with_potential(v)?;
                }
                if let Some(m) = c.saturation {
                    f = f.with_saturation(m)?;
                }
                Coupling::Local(f)
            }
            CouplingKind::Nonlocal => {
                let outer = match c.outer {
                    OuterKind::Affine => OuterMap::Affine {
                        slope: c.slope,
                        offset: c.offset,
                    },
                    OuterKind::Saturating => OuterMap::Saturating {
                        amplitude: c.amplitude,
                        scale: c.scale,
                    },
                };
                let kernel = NonlocalCoupling::gaussian_kernel(grid, c.kernel_width)?;
                let mut f = NonlocalCoupling::new(kernel, outer)?;
                if let Some(v) = potential {
                    f = f.with_potential(v)?;
                }
                Coupling::Nonlocal(f)
            }
        })
    }

    pub fn problem(&self) -> Result<MfgProblem, crate::run::RunError> {
        let grid = self.grid();
        let coupling = self.coupling(&grid)?;
        Ok(MfgProblem::new(
            self.problem.s,
            self.hamiltonian(),
            coupling,
            grid,
            self.solver.clone(),
            self.problem.regime,
        )?)
    }

    /// Canonical TOML rendering.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
