//! The two iteration engines. Each step updates z, then x, then y.
//!
//! ```text
//! z+ ∈ argmin g(z) + ⟨y, Ax − z⟩ + (r/2)‖Ax − z‖² + ½‖z − z‖²_{M2}
//! x+ ∈ argmin h(x) + ⟨y, Ax⟩ + (r/2)‖Ax − z+‖² + ½‖x − x‖²_{M1}     (P-ADMM)
//! x+ ∈ argmin ⟨∇h(x), x⟩ + ⟨y, Ax⟩ + (r/2)‖Ax − z+‖² + ½‖x − x‖²_{M1}  (PL-ADMM)
//! y+ = y + ρr(Ax+ − z+)
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{build_record, initial_record};
use crate::error::{Error, Result};
use crate::functions::{ProxFunction, SmoothFunction};
use crate::linops::{cholesky, cholesky_solve, conjugate_gradient, dot, norm, sub, LinearMap};
use crate::params::{
    check_admissibility, AdmissibilityInputs, AdmissibilityReport, BundleInputs, ConstantsBundle, MeritRegime,
    MetricSchedule, ScheduleKind, Variant, DEFAULT_GAMMA,
};
use crate::trace::{StopReason, Trace, TraceHeader, TraceRecord};

/// `min g(Ax) + h(x)`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub h: Arc<dyn SmoothFunction>,
    pub g: ProxFunction,
    pub a: LinearMap,
}

impl ProblemSpec {
    pub fn new(h: Arc<dyn SmoothFunction>, g: ProxFunction, a: LinearMap) -> Result<Self> {
        if h.dim() != a.cols() {
            return Err(Error::Dimension(format!("h acts on R^{} but A has {} columns", h.dim(), a.cols())));
        }
        match &g {
            ProxFunction::Box { lower, upper } if lower.len() != a.rows() || upper.len() != a.rows() => {
                return Err(Error::Dimension("box bounds must match the rows of A".into()))
            }
            ProxFunction::Quadratic { c, .. } if c.len() != a.rows() => {
                return Err(Error::Dimension("quadratic center must match the rows of A".into()))
            }
            _ => {}
        }
        Ok(ProblemSpec { h, g, a })
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    /// `h(x) + g(Ax)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.h.eval(x) + self.g.eval(&self.a.mv(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XSolver {
    /// Explicit prox (P-ADMM) or gradient (PL-ADMM) step; needs the
    /// prox-linear schedule.
    ProxForm,
    /// Direct solve of the P-ADMM subproblem for quadratic `h`.
    QuadraticClosedForm,
    /// Cholesky solve of the PL-ADMM linear system.
    LinearSystemDense,
    /// Conjugate gradients on the PL-ADMM linear system.
    LinearSystemCg,
}

impl XSolver {
    pub fn name(self) -> &'static str {
        match self {
            XSolver::ProxForm => "prox_form",
            XSolver::QuadraticClosedForm => "quadratic_closed_form",
            XSolver::LinearSystemDense => "linear_system_dense",
            XSolver::LinearSystemCg => "linear_system_cg",
        }
    }
}

/// Stopping rule. A zero tolerance disables that test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stopping {
    pub max_iter: usize,
    /// On `‖Δx‖ + ‖Δz‖ + ‖Δy‖`.
    pub diff_tol: f64,
    /// On the Lagrangian subgradient norm `‖d‖`.
    pub kkt_tol: f64,
}

impl Default for Stopping {
    fn default() -> Self {
        Stopping { max_iter: 1000, diff_tol: 1e-10, kkt_tol: 0.0 }
    }
}

/// CG relative tolerance for [`XSolver::LinearSystemCg`].
pub const CG_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub variant: Variant,
    pub r: f64,
    pub rho: f64,
    pub gamma: f64,
    pub schedule: MetricSchedule,
    pub x_solver: XSolver,
    pub stopping: Stopping,
    pub regime: MeritRegime,
    /// Run even when the admissibility check fails.
    pub allow_uncertified: bool,
    pub x0: Option<Vec<f64>>,
    pub z0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    /// Free-form label echoed into the trace header.
    pub label: String,
}

impl SolverConfig {
    pub fn new(variant: Variant, r: f64, rho: f64, schedule: MetricSchedule, x_solver: XSolver) -> Self {
        SolverConfig {
            variant,
            r,
            rho,
            gamma: DEFAULT_GAMMA,
            schedule,
            x_solver,
            stopping: Stopping::default(),
            regime: MeritRegime::Standard,
            allow_uncertified: false,
            x0: None,
            z0: None,
            y0: None,
            label: String::new(),
        }
    }
}

/// `(x^k, z^k, y^k)` plus the previous iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub k: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub y_prev: Vec<f64>,
}

impl IterateState {
    /// A starting state with no history, so all differences are zero.
    pub fn start(x: Vec<f64>, z: Vec<f64>, y: Vec<f64>) -> Self {
        IterateState { k: 0, x_prev: x.clone(), z_prev: z.clone(), y_prev: y.clone(), x, z, y }
    }
}

enum XFactor {
    None,
    Chol(Vec<f64>),
    Cg(Vec<f64>),
}

/// A validated problem/config pair with the x-step system prepared.
pub struct Solver<'a> {
    problem: &'a ProblemSpec,
    config: &'a SolverConfig,
    m2: f64,
    factor: XFactor,
    constants: ConstantsBundle,
    report: AdmissibilityReport,
}

impl<'a> Solver<'a> {
    /// Checks compatibility, certifies admissibility and factors the x-step
    /// system. Configuration problems surface here, never mid-run.
    pub fn new(problem: &'a ProblemSpec, config: &'a SolverConfig) -> Result<Self> {
        let (n, m) = (problem.n(), problem.m());
        let sched = &config.schedule;
        if sched.m1(0).dim() != n || sched.m2(0).dim() != m {
            return Err(Error::Dimension("schedule sizes do not match A".into()));
        }
        let m2 = sched
            .m2(0)
            .as_scalar_identity()
            .ok_or_else(|| Error::Unsupported("M2 must be a scalar multiple of the identity".into()))?;
        for (name, v, len) in [("x0", &config.x0, n), ("z0", &config.z0, m), ("y0", &config.y0, m)] {
            if let Some(v) = v {
                if v.len() != len {
                    return Err(Error::Dimension(format!("{name} has length {}, expected {len}", v.len())));
                }
            }
        }
        let l = problem.h.lipschitz();
        let inputs = AdmissibilityInputs {
            schedule: sched,
            a: &problem.a,
            r: config.r,
            rho: config.rho,
            l,
            gamma: config.gamma,
            variant: config.variant,
        };
        let report = check_admissibility(&inputs, &[0], config.regime)?;
        if !report.passed() && !config.allow_uncertified {
            return Err(Error::Unsupported(format!(
                "configuration is not admissible: {}",
                report.failures().join(", ")
            )));
        }
        let constants =
            ConstantsBundle::compute(&BundleInputs::new(config.variant, l, &problem.a, sched.mu1(), sched.mu2(), config.r, config.rho))?;
        let factor = Self::prepare(problem, config)?;
        Ok(Solver { problem, config, m2, factor, constants, report })
    }

    fn prepare(problem: &ProblemSpec, config: &SolverConfig) -> Result<XFactor> {
        let n = problem.n();
        let r = config.r;
        let m1 = config.schedule.m1(0).data();
        let sys_base: Vec<f64> = problem.a.gram_ata().iter().zip(m1).map(|(g, m)| r * g + m).collect();
        let prox_linear = config.schedule.kind() == ScheduleKind::ProxLinear;
        match (config.variant, config.x_solver) {
            (_, XSolver::ProxForm) if !prox_linear => {
                Err(Error::Unsupported("prox_form needs the prox-linear schedule".into()))
            }
            (Variant::PAdmm, XSolver::ProxForm) => {
                if problem.h.as_quadratic().is_none() {
                    return Err(Error::Unsupported("prox_form for P-ADMM needs a prox-capable (quadratic) h".into()));
                }
                Ok(XFactor::None)
            }
            (Variant::PlAdmm, XSolver::ProxForm) => Ok(XFactor::None),
            (Variant::PAdmm, XSolver::QuadraticClosedForm) => {
                let q = problem
                    .h
                    .as_quadratic()
                    .ok_or_else(|| Error::Unsupported("quadratic_closed_form needs quadratic h".into()))?;
                let sys: Vec<f64> = sys_base.iter().zip(q.hessian()).map(|(s, h)| s + h).collect();
                Ok(XFactor::Chol(cholesky(&sys, n).map_err(|e| {
                    Error::Numerical(format!("P-ADMM x-subproblem is not strongly convex: {e}"))
                })?))
            }
            (Variant::PAdmm, _) => Err(Error::Unsupported(format!(
                "{} is only available for PL-ADMM",
                config.x_solver.name()
            ))),
            (Variant::PlAdmm, XSolver::QuadraticClosedForm) => {
                Err(Error::Unsupported("quadratic_closed_form is the P-ADMM x-step".into()))
            }
            (Variant::PlAdmm, XSolver::LinearSystemDense) => Ok(XFactor::Chol(cholesky(&sys_base, n).map_err(|e| {
                Error::Numerical(format!("PL-ADMM system rA*A + M1 is singular: {e}"))
            })?)),
            (Variant::PlAdmm, XSolver::LinearSystemCg) => Ok(XFactor::Cg(sys_base)),
        }
    }

    pub fn constants(&self) -> &ConstantsBundle {
        &self.constants
    }

    pub fn report(&self) -> &AdmissibilityReport {
        &self.report
    }

    pub fn initial_state(&self) -> IterateState {
        let (n, m) = (self.problem.n(), self.problem.m());
        let c = self.config;
        IterateState::start(
            c.x0.clone().unwrap_or_else(|| vec![0.0; n]),
            c.z0.clone().unwrap_or_else(|| vec![0.0; m]),
            c.y0.clone().unwrap_or_else(|| vec![0.0; m]),
        )
    }

    pub fn z_step(&self, st: &IterateState) -> Vec<f64> {
        z_step_with(self.problem, self.config.r, self.m2, st)
    }

    pub fn x_step(&self, st: &IterateState, z_new: &[f64]) -> Result<Vec<f64>> {
        let p = self.problem;
        let c = self.config;
        let a = &p.a;
        let r = c.r;
        let m1 = c.schedule.m1(st.k);
        match (&self.factor, c.variant) {
            (XFactor::None, variant) => {
                let t = c.schedule.t().expect("prox-linear schedule carries t");
                let ax = a.mv(&st.x);
                let w: Vec<f64> = st.y.iter().zip(ax.iter().zip(z_new)).map(|(y, (ax, z))| y + r * (ax - z)).collect();
                let atw = a.mtv(&w);
                match variant {
                    Variant::PAdmm => {
                        let v: Vec<f64> = st.x.iter().zip(&atw).map(|(x, g)| x - t * g).collect();
                        p.h.as_quadratic().expect("checked at setup").prox(&v, t)
                    }
                    Variant::PlAdmm => {
                        let gh = p.h.grad(&st.x);
                        Ok(st.x.iter().zip(gh.iter().zip(&atw)).map(|(x, (g, w))| x - t * (g + w)).collect())
                    }
                }
            }
            (factor, variant) => {
                let mut rhs = m1.mv(&st.x);
                let aty = a.mtv(&st.y);
                let atz = a.mtv(z_new);
                let lin: Vec<f64> = match variant {
                    Variant::PAdmm => p.h.as_quadratic().expect("checked at setup").linear_term().to_vec(),
                    Variant::PlAdmm => p.h.grad(&st.x).iter().map(|g| -g).collect(),
                };
                for i in 0..rhs.len() {
                    rhs[i] += lin[i] - aty[i] + r * atz[i];
                }
                let n = p.n();
                match factor {
                    XFactor::Chol(l) => Ok(cholesky_solve(l, n, &rhs)),
                    XFactor::Cg(sys) => {
                        // Solve for the correction from x^k, normalized, so the
                        // tolerance is relative to the step and not to the rhs.
                        let sx: Vec<f64> = (0..n).map(|i| dot(&sys[i * n..(i + 1) * n], &st.x)).collect();
                        let res0 = sub(&rhs, &sx);
                        let scale = norm(&res0);
                        if scale == 0.0 {
                            return Ok(st.x.clone());
                        }
                        let unit: Vec<f64> = res0.iter().map(|v| v / scale).collect();
                        let cg = conjugate_gradient(sys, n, &unit, &vec![0.0; n], CG_TOL, 10 * n.max(1));
                        Ok(st.x.iter().zip(&cg.x).map(|(x, d)| x + scale * d).collect())
                    }
                    XFactor::None => unreachable!(),
                }
            }
        }
    }

    pub fn y_step(&self, st: &IterateState, x_new: &[f64], z_new: &[f64]) -> Vec<f64> {
        y_step_with(&self.problem.a, self.config.rho, self.config.r, &st.y, x_new, z_new)
    }

    /// z-step, x-step, y-step, in that order.
    pub fn step(&self, st: &IterateState) -> Result<IterateState> {
        let z = self.z_step(st);
        let x = self.x_step(st, &z)?;
        let y = self.y_step(st, &x, &z);
        if x.iter().chain(&z).chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite iterate at k = {}", st.k + 1)));
        }
        Ok(IterateState {
            k: st.k + 1,
            x,
            z,
            y,
            x_prev: st.x.clone(),
            z_prev: st.z.clone(),
            y_prev: st.y.clone(),
        })
    }

    fn header(&self, status: StopReason, iterations: usize) -> TraceHeader {
        let c = self.config;
        TraceHeader {
            label: c.label.clone(),
            variant: c.variant,
            regime: c.regime,
            schedule: c.schedule.kind(),
            t: c.schedule.t(),
            m2: self.m2,
            x_solver: c.x_solver.name().to_string(),
            n: self.problem.n(),
            m: self.problem.m(),
            gamma: c.gamma,
            max_iter: c.stopping.max_iter,
            diff_tol: c.stopping.diff_tol,
            kkt_tol: c.stopping.kkt_tol,
            certified: self.report.passed(),
            constants: self.constants.clone(),
            status,
            iterations,
        }
    }

    /// Iterates until a stopping test fires, auditing each transition.
    pub fn run(&self) -> std::result::Result<Trace, RunFailure> {
        let mut st = self.initial_state();
        let mut records: Vec<TraceRecord> =
            vec![initial_record(&st, self.problem, &self.constants, self.config.regime, self.config.r)];
        let stop = &self.config.stopping;
        let mut status = StopReason::MaxIter;
        for _ in 0..stop.max_iter {
            let next = match self.step(&st) {
                Ok(s) => s,
                Err(error) => {
                    let iterations = records.len() - 1;
                    let trace = Trace { header: self.header(StopReason::Failed, iterations), records };
                    return Err(RunFailure { error, partial: Box::new(trace) });
                }
            };
            let rec = build_record(&next, self.problem, &self.constants, &self.config.schedule, self.config.regime, self.config.r, self.config.rho);
            let moved = rec.dx + rec.dz + rec.dy;
            let d_norm = rec.d_norm;
            records.push(rec);
            st = next;
            if stop.diff_tol > 0.0 && moved <= stop.diff_tol {
                status = StopReason::DiffTol;
                break;
            }
            if stop.kkt_tol > 0.0 && d_norm <= stop.kkt_tol {
                status = StopReason::KktTol;
                break;
            }
        }
        let iterations = records.len() - 1;
        Ok(Trace { header: self.header(status, iterations), records })
    }
}

/// A failed run with the trace up to the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Box<Trace>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} iterations)", self.error, self.partial.records.len().saturating_sub(1))
    }
}

impl std::error::Error for RunFailure {}

/// Validates and runs in one call.
pub fn run(problem: &ProblemSpec, config: &SolverConfig) -> std::result::Result<Trace, RunFailure> {
    let solver = Solver::new(problem, config).map_err(|error| RunFailure {
        error,
        partial: Box::new(Trace {
            header: TraceHeader {
                label: config.label.clone(),
                variant: config.variant,
                regime: config.regime,
                schedule: config.schedule.kind(),
                t: config.schedule.t(),
                m2: 0.0,
                x_solver: config.x_solver.name().into(),
                n: problem.n(),
                m: problem.m(),
                gamma: config.gamma,
                max_iter: config.stopping.max_iter,
                diff_tol: config.stopping.diff_tol,
                kkt_tol: config.stopping.kkt_tol,
                certified: false,
                constants: placeholder_constants(problem, config),
                status: StopReason::Failed,
                iterations: 0,
            },
            records: Vec::new(),
        }),
    })?;
    solver.run()
}

fn placeholder_constants(problem: &ProblemSpec, config: &SolverConfig) -> ConstantsBundle {
    let inp = BundleInputs::new(
        config.variant,
        problem.h.lipschitz(),
        &problem.a,
        config.schedule.mu1(),
        config.schedule.mu2(),
        config.r,
        config.rho,
    );
    ConstantsBundle::compute(&inp).unwrap_or_else(|_| {
        let fallback = BundleInputs { rho: 1.0, r: 1.0, lam_min_aat: 1.0, ..inp };
        ConstantsBundle::compute(&fallback).expect("fallback inputs are valid")
    })
}

/// z-step for `M2 = m2·I`: the prox of `g/(r + m2)` at
/// `(r·Ax + y + m2·z)/(r + m2)`.
pub fn z_step_with(problem: &ProblemSpec, r: f64, m2: f64, st: &IterateState) -> Vec<f64> {
    let ax = problem.a.mv(&st.x);
    let s = r + m2;
    let center: Vec<f64> = ax
        .iter()
        .zip(st.y.iter().zip(&st.z))
        .map(|(ax, (y, z))| (r * ax + y + m2 * z) / s)
        .collect();
    problem.g.prox(&center, 1.0 / s)
}

/// `y + ρr(Ax − z)`.
pub fn y_step_with(a: &LinearMap, rho: f64, r: f64, y: &[f64], x_new: &[f64], z_new: &[f64]) -> Vec<f64> {
    let ax = a.mv(x_new);
    y.iter().zip(ax.iter().zip(z_new)).map(|(y, (ax, z))| y + rho * r * (ax - z)).collect()
}
