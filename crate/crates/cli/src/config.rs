//! Run configuration files.
//!
//! A configuration is a TOML document with four sections. `[problem]` either
//! names a generator (`generator = "lasso"` plus its parameters) or gives the
//! data directly (`b_matrix`, `b`, `a_matrix` as inline rows or paths to
//! matrix text files, and a `[problem.g]` table). Relative paths resolve
//! against the directory holding the configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ncadmm::functions::{ProxFunction, Quadratic};
use ncadmm::linops::{LinearMap, MetricMatrix};
use ncadmm::params::{
    make_schedule, relaxation_constants, suggest_r, variant_constants, MeritRegime, RChoice, ScheduleSpec, Variant,
    DEFAULT_GAMMA,
};
use ncadmm::problems::{Oracle, ProblemDescriptor, TestProblem};
use ncadmm::rates::MERIT_LAG;
use ncadmm::solver::{ProblemSpec, SolverConfig, Stopping, XSolver};
use serde::Deserialize;

/// A configuration that could not be read, parsed or resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProblemSection {
    Generator(ProblemDescriptor),
    Data(DataProblem),
}

/// A matrix given inline as rows or as a path to a matrix text file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Rows(Vec<Vec<f64>>),
    File(PathBuf),
}

/// A vector given inline or as a path to a one-column matrix text file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum VectorSource {
    Values(Vec<f64>),
    File(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataProblem {
    /// `h(x) = ½‖Bx − b‖²`.
    pub b_matrix: MatrixSource,
    pub b: VectorSource,
    pub a_matrix: MatrixSource,
    pub g: ProxFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Zero,
    Constant,
    ProxLinear,
}

/// Either a number or the string `"suggest"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RSetting {
    Value(f64),
    Named(RKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RKeyword {
    Suggest,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub variant: Variant,
    pub r: RSetting,
    #[serde(default = "one")]
    pub rho: f64,
    pub schedule: ScheduleName,
    /// `M1 = mu1·I` for the constant schedule, and the metric norm of the
    /// prox-linear schedule when `r` is suggested.
    #[serde(default)]
    pub mu1: f64,
    /// `M2 = m2·I` for the constant schedule.
    #[serde(default)]
    pub m2: f64,
    /// Step of the prox-linear schedule.
    pub t: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub x_solver: Option<XSolver>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_diff_tol")]
    pub diff_tol: f64,
    #[serde(default)]
    pub kkt_tol: f64,
    #[serde(default = "default_regime")]
    pub regime: MeritRegime,
    pub x0: Option<Vec<f64>>,
    pub z0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Run the rate analysis after `run`.
    #[serde(default)]
    pub rates: bool,
    #[serde(default = "default_l0")]
    pub l0: usize,
    /// Tolerance of the KKT gaps reported by `run`.
    #[serde(default = "default_kkt_report_tol")]
    pub kkt_tol: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection { rates: false, l0: default_l0(), kkt_tol: default_kkt_report_tol() }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_max_iter() -> usize {
    1000
}
fn default_diff_tol() -> f64 {
    1e-10
}
fn default_regime() -> MeritRegime {
    MeritRegime::Standard
}
fn default_l0() -> usize {
    MERIT_LAG
}
fn default_kkt_report_tol() -> f64 {
    1e-6
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| err(format!("config: {e}")))
    }

    /// Reads and parses a configuration, keeping its directory for paths.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_matrix(src: &MatrixSource, base: &Path, name: &str) -> Result<LinearMap, ConfigError> {
    let res = match src {
        MatrixSource::Rows(rows) => LinearMap::from_rows(rows),
        MatrixSource::File(p) => {
            let p = resolve(base, p);
            let text = std::fs::read_to_string(&p).map_err(|e| err(format!("cannot read {}: {e}", p.display())))?;
            LinearMap::parse_text(&text)
        }
    };
    res.map_err(|e| err(format!("{name}: {e}")))
}

fn load_vector(src: &VectorSource, base: &Path, name: &str) -> Result<Vec<f64>, ConfigError> {
    match src {
        VectorSource::Values(v) => Ok(v.clone()),
        VectorSource::File(p) => {
            let m = load_matrix(&MatrixSource::File(p.clone()), base, name)?;
            if m.cols() != 1 {
                return Err(err(format!("{name}: expected one column, got {}", m.cols())));
            }
            Ok(m.data().to_vec())
        }
    }
}

/// The problem of a configuration, with its oracle when generated.
pub fn build_problem(section: &ProblemSection, base: &Path) -> Result<TestProblem, ConfigError> {
    match section {
        ProblemSection::Generator(d) => d.build().map_err(|e| err(format!("problem: {e}"))),
        ProblemSection::Data(d) => {
            let b_mat = load_matrix(&d.b_matrix, base, "b_matrix")?;
            let b = load_vector(&d.b, base, "b")?;
            let a = load_matrix(&d.a_matrix, base, "a_matrix")?;
            let h = Quadratic::least_squares(&b_mat, &b).map_err(|e| err(format!("problem: {e}")))?;
            let spec = ProblemSpec::new(Arc::new(h), d.g.clone(), a).map_err(|e| err(format!("problem: {e}")))?;
            let descriptor = format!("data n={} m={}", spec.n(), spec.m());
            Ok(TestProblem { spec, oracle: Oracle::None, seed: 0, descriptor })
        }
    }
}

/// Resolves `r`, the schedule and the x-solver into a solver configuration.
pub fn build_solver_config(s: &SolverSection, problem: &ProblemSpec, label: &str) -> Result<SolverConfig, ConfigError> {
    let a = &problem.a;
    let (n, m) = (problem.n(), problem.m());
    let l = problem.h.lipschitz();
    if !(s.rho > 0.0 && s.rho < 2.0) {
        return Err(err(format!("solver.rho must lie in (0, 2), got {}", s.rho)));
    }
    let (r, spec) = match (s.r, s.schedule) {
        (RSetting::Value(r), ScheduleName::Zero) => (r, ScheduleSpec::Zero),
        (RSetting::Value(r), ScheduleName::Constant) => (r, constant_spec(s, n, m)),
        (RSetting::Value(r), ScheduleName::ProxLinear) => {
            let t = s.t.ok_or_else(|| err("solver.t is required by the prox_linear schedule with a numeric r"))?;
            (r, ScheduleSpec::ProxLinear { t })
        }
        (RSetting::Named(RKeyword::Suggest), ScheduleName::Zero) => {
            let choice = RChoice::InjectiveZero { lam_min_ata: a.lambda_min_ata() };
            (suggested_r(s, choice, 0.0, a, l)?, ScheduleSpec::Zero)
        }
        (RSetting::Named(RKeyword::Suggest), ScheduleName::Constant) => {
            let choice = RChoice::ConstantMetric { mu1: s.mu1 };
            (suggested_r(s, choice, s.mu1, a, l)?, constant_spec(s, n, m))
        }
        (RSetting::Named(RKeyword::Suggest), ScheduleName::ProxLinear) => suggested_prox_linear(s, a, l)?,
    };
    if !(r > 0.0) {
        return Err(err(format!("solver.r must be positive, got {r}")));
    }
    let schedule = make_schedule(&spec, a, r).map_err(|e| err(format!("schedule: {e}")))?;
    let x_solver = s.x_solver.unwrap_or(match (s.variant, s.schedule) {
        (_, ScheduleName::ProxLinear) => XSolver::ProxForm,
        (Variant::PAdmm, _) => XSolver::QuadraticClosedForm,
        (Variant::PlAdmm, _) => XSolver::LinearSystemDense,
    });
    let mut cfg = SolverConfig::new(s.variant, r, s.rho, schedule, x_solver);
    cfg.gamma = s.gamma;
    cfg.regime = s.regime;
    cfg.stopping = Stopping { max_iter: s.max_iter, diff_tol: s.diff_tol, kkt_tol: s.kkt_tol };
    cfg.x0 = s.x0.clone();
    cfg.z0 = s.z0.clone();
    cfg.y0 = s.y0.clone();
    cfg.label = label.to_string();
    Ok(cfg)
}

fn constant_spec(s: &SolverSection, n: usize, m: usize) -> ScheduleSpec {
    ScheduleSpec::Constant { m1: MetricMatrix::scaled_identity(n, s.mu1), m2: MetricMatrix::scaled_identity(m, s.m2) }
}

/// Closed-form `r` for `choice`, against `C_M` in the standard regime and
/// `C_M′` in the tight one.
fn suggested_r(s: &SolverSection, choice: RChoice, mu1: f64, a: &LinearMap, l: f64) -> Result<f64, ConfigError> {
    // T1 and C_M do not depend on r, so any positive r evaluates them.
    let (_, t1) = relaxation_constants(s.rho, 1.0, a.lambda_min_aat()).map_err(|e| err(format!("suggest r: {e}")))?;
    let vc = variant_constants(l, mu1, 1.0, t1, s.variant);
    let c_m = if s.regime == MeritRegime::Tight { vc.c_m_prime } else { vc.c_m };
    suggest_r(choice, l, t1, c_m, s.gamma).map_err(|e| err(format!("suggest r: {e}")))
}

/// With `A*A = a²I` the prox-linear metric is `mu1·I` for
/// `t = 1/(r·a² + mu1)`, so `r` follows the injective bound at that `mu1`.
/// A fixed `t` cannot be certified together with the suggested `r`.
fn suggested_prox_linear(s: &SolverSection, a: &LinearMap, l: f64) -> Result<(f64, ScheduleSpec), ConfigError> {
    if s.t.is_some() {
        return Err(err("solver.t is derived when r = \"suggest\"; set solver.mu1 instead"));
    }
    if !(s.mu1 > 0.0) {
        return Err(err("solver.mu1 > 0 is required by the prox_linear schedule with r = \"suggest\""));
    }
    let a2 = a.op_norm().powi(2);
    if (a.lambda_min_ata() - a2).abs() > 1e-12 * a2 {
        return Err(err("r = \"suggest\" with the prox_linear schedule needs A*A = a^2 I"));
    }
    let r = suggested_r(s, RChoice::InjectiveZero { lam_min_ata: a2 }, s.mu1, a, l)?;
    Ok((r, ScheduleSpec::ProxLinear { t: 1.0 / (r * a2 + s.mu1) }))
}
