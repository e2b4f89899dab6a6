//! Acceptance suite: certified runs of every test problem across variants,
//! relaxation parameters and merit regimes, audited and summarized as a
//! markdown table.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use ncadmm::diagnostics::{
    bound_check_big_d, bound_check_d, descent_check, iterate_estimates_check, kkt_residual, AuditReport, KktResidual,
};
use ncadmm::params::{
    check_admissibility, relaxation_constants, suggest_r, variant_constants, AdmissibilityInputs, RChoice,
};
use ncadmm::problems::{l0_least_squares, lasso_problem, oracle_distance, quadratic_quadratic, TestProblem};
use ncadmm::rates::{analyze_merit_rates, RateReport, MERIT_LAG};
use ncadmm::solver::run;
use ncadmm::{ConstantsBundle, Error, MeritRegime, MetricMatrix, MetricSchedule, Result, SolverConfig, Stopping, Trace, Variant, XSolver};

pub mod checks;

/// Relaxation parameters covered by the matrix.
pub const RHOS: [f64; 3] = [0.5, 1.0, 1.5];
pub const VARIANTS: [Variant; 2] = [Variant::PAdmm, Variant::PlAdmm];
pub const REGIMES: [MeritRegime; 2] = [MeritRegime::Standard, MeritRegime::Tight];
/// Fixed iteration count of every matrix run.
pub const MATRIX_ITERS: usize = 40_000;
/// Fewest instances the suite accepts.
pub const MIN_INSTANCES: usize = 6;
/// `μ1 = METRIC_RATIO·L` for the constant-metric schedule.
pub const METRIC_RATIO: f64 = 1.5;
/// `μ1` of the prox-linear schedule, relative to `L`.
pub const PROX_LINEAR_DELTA: f64 = 0.1;

/// How `M1` and `r` are chosen for an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleChoice {
    /// `M1 = ratio·L·I`, `M2 = 0`.
    ConstantMetric { ratio: f64 },
    /// `M1 = (1/t)I − rA*A` on an instance with `A*A = a²I`.
    ProxLinear { delta: f64 },
    /// `M1 = M2 = 0` with injective `A`.
    InjectiveZero,
}

impl ScheduleChoice {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleChoice::ConstantMetric { .. } => "constant",
            ScheduleChoice::ProxLinear { .. } => "prox_linear",
            ScheduleChoice::InjectiveZero => "zero",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub problem: TestProblem,
    pub schedule: ScheduleChoice,
}

/// The six acceptance instances.
pub fn suite_instances(seed: u64) -> Result<Vec<Instance>> {
    let mk = |name: &str, problem: TestProblem, schedule| Instance { name: name.to_string(), problem, schedule };
    let constant = ScheduleChoice::ConstantMetric { ratio: METRIC_RATIO };
    let prox = ScheduleChoice::ProxLinear { delta: PROX_LINEAR_DELTA };
    Ok(vec![
        mk("qq_1d", quadratic_quadratic(1, 1, seed)?, ScheduleChoice::InjectiveZero),
        mk("qq_5x3", quadratic_quadratic(5, 3, seed.wrapping_add(1))?, constant),
        mk("lasso_1d", lasso_problem(1, 1, 1, 0.1, seed.wrapping_add(2))?, prox),
        mk("lasso_10x5", lasso_problem(10, 5, 3, 0.1, seed.wrapping_add(3))?, constant),
        mk("l0_n1", l0_least_squares(1, 1, 0.05, seed.wrapping_add(4))?, prox),
        mk("l0_n5", l0_least_squares(5, 5, 0.05, seed.wrapping_add(5))?, ScheduleChoice::InjectiveZero),
    ])
}

fn c_m_for(regime: MeritRegime, l: f64, mu1: f64, t1: f64, r_any: f64, variant: Variant) -> f64 {
    // C_M and C_M′ do not depend on r.
    let vc = variant_constants(l, mu1, r_any, t1, variant);
    match regime {
        MeritRegime::Standard => vc.c_m,
        MeritRegime::Tight => vc.c_m_prime,
    }
}

/// Picks `r`, the schedule and the x-solver for one cell, then certifies the
/// result. Fails if the certificate does not pass.
pub fn certified_config(inst: &Instance, variant: Variant, rho: f64, regime: MeritRegime) -> Result<SolverConfig> {
    let spec = &inst.problem.spec;
    let a = &spec.a;
    let (n, m) = (spec.n(), spec.m());
    let l = spec.h.lipschitz();
    let gamma = ncadmm::params::DEFAULT_GAMMA;
    let (_, t1) = relaxation_constants(rho, 1.0, a.lambda_min_aat())?;
    let (r, schedule, x_solver) = match inst.schedule {
        ScheduleChoice::ConstantMetric { ratio } => {
            let mu1 = ratio * l;
            let r = suggest_r(RChoice::ConstantMetric { mu1 }, l, t1, c_m_for(regime, l, mu1, t1, 1.0, variant), gamma)?;
            let sched = MetricSchedule::constant(MetricMatrix::scaled_identity(n, mu1), MetricMatrix::zeros(m))?;
            let xs = match variant {
                Variant::PAdmm => XSolver::QuadraticClosedForm,
                Variant::PlAdmm if n > 5 => XSolver::LinearSystemCg,
                Variant::PlAdmm => XSolver::LinearSystemDense,
            };
            (r, sched, xs)
        }
        ScheduleChoice::InjectiveZero => {
            let lam = a.lambda_min_ata();
            let r = suggest_r(RChoice::InjectiveZero { lam_min_ata: lam }, l, t1, c_m_for(regime, l, 0.0, t1, 1.0, variant), gamma)?;
            let xs = match variant {
                Variant::PAdmm => XSolver::QuadraticClosedForm,
                Variant::PlAdmm => XSolver::LinearSystemDense,
            };
            (r, MetricSchedule::zero(n, m), xs)
        }
        ScheduleChoice::ProxLinear { delta } => {
            let a2 = a.op_norm().powi(2);
            if (a.lambda_min_ata() - a2).abs() > 1e-12 * a2 {
                return Err(Error::Unsupported(format!("{}: prox-linear certification needs A*A = a^2 I", inst.name)));
            }
            let mu1 = delta * l;
            let r = suggest_r(RChoice::InjectiveZero { lam_min_ata: a2 }, l, t1, c_m_for(regime, l, mu1, t1, 1.0, variant), gamma)?;
            let t = 1.0 / (r * a2 + mu1);
            (r, MetricSchedule::prox_linear(a, r, t)?, XSolver::ProxForm)
        }
    };
    let mut cfg = SolverConfig::new(variant, r, rho, schedule, x_solver);
    cfg.regime = regime;
    cfg.gamma = gamma;
    cfg.label = format!("{} {} rho={} {}", inst.name, variant.name(), rho, regime.name());
    let inp = AdmissibilityInputs { schedule: &cfg.schedule, a, r, rho, l, gamma, variant };
    let rep = check_admissibility(&inp, &[0], regime)?;
    if !rep.passed() {
        return Err(Error::Unsupported(format!("{}: not certified: {}", cfg.label, rep.failures().join(", "))));
    }
    Ok(cfg)
}

/// Run options; the C5 scale exists only with the `mutation-hooks` feature.
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub seed: u64,
    pub iterations: usize,
    #[cfg(feature = "mutation-hooks")]
    pub c5_scale: f64,
}

impl SuiteOptions {
    pub fn new(seed: u64) -> Self {
        SuiteOptions {
            seed,
            iterations: MATRIX_ITERS,
            #[cfg(feature = "mutation-hooks")]
            c5_scale: 1.0,
        }
    }

    /// Constants the audits are evaluated with.
    pub fn audit_constants(&self, c: &ConstantsBundle) -> ConstantsBundle {
        #[allow(unused_mut)]
        let mut c = c.clone();
        #[cfg(feature = "mutation-hooks")]
        {
            c.c5 *= self.c5_scale;
        }
        c
    }
}

/// Everything measured on one matrix cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub instance: String,
    pub schedule: &'static str,
    pub variant: Variant,
    pub rho: f64,
    pub regime: MeritRegime,
    pub r: f64,
    pub iterations: usize,
    pub audit: AuditReport,
    pub kkt: KktResidual,
    pub oracle_kind: &'static str,
    pub oracle_gap: Option<f64>,
    pub final_dx: f64,
    pub final_dz: f64,
    pub final_dy: f64,
    /// `|F_K − (h + g)(x_K, z_K)|`.
    pub limit_gap: f64,
    pub elapsed: Duration,
    pub trace: Trace,
}

/// Tolerance of the dual-membership test on final iterates.
pub const KKT_TOL: f64 = 1e-6;

pub fn run_cell(inst: &Instance, variant: Variant, rho: f64, regime: MeritRegime, opts: &SuiteOptions) -> Result<CellOutcome> {
    let start = Instant::now();
    let mut cfg = certified_config(inst, variant, rho, regime)?;
    cfg.stopping = Stopping { max_iter: opts.iterations, diff_tol: 0.0, kkt_tol: 0.0 };
    let spec = &inst.problem.spec;
    let trace = run(spec, &cfg).map_err(|f| f.error)?;
    let c = opts.audit_constants(&trace.header.constants);
    let audit = AuditReport {
        descent: descent_check(&trace, &c, regime)?,
        estimates: iterate_estimates_check(&trace, &c),
        bound_d: bound_check_d(&trace, &c),
        bound_big_d: bound_check_big_d(&trace, &c, regime)?,
    };
    let last = trace.last();
    let kkt = kkt_residual(&last.x, &last.z, &last.y, spec, KKT_TOL);
    Ok(CellOutcome {
        instance: inst.name.clone(),
        schedule: inst.schedule.name(),
        variant,
        rho,
        regime,
        r: cfg.r,
        iterations: trace.header.iterations,
        audit,
        kkt,
        oracle_kind: inst.problem.oracle.kind(),
        oracle_gap: oracle_distance(&inst.problem, &last.x),
        final_dx: last.dx,
        final_dz: last.dz,
        final_dy: last.dy,
        limit_gap: (last.fk - last.obj).abs(),
        elapsed: start.elapsed(),
        trace,
    })
}

/// Every (instance, variant, ρ, regime) cell, in a fixed order.
pub fn run_matrix(instances: &[Instance], opts: &SuiteOptions) -> Result<Vec<CellOutcome>> {
    let mut cells = Vec::new();
    for (i, _) in instances.iter().enumerate() {
        for v in VARIANTS {
            for rho in RHOS {
                for regime in REGIMES {
                    cells.push((i, v, rho, regime));
                }
            }
        }
    }
    cells
        .par_iter()
        .map(|&(i, v, rho, regime)| run_cell(&instances[i], v, rho, regime, opts))
        .collect()
}

/// The exponent-estimation run: constant metric, tight regime.
pub fn rate_run(seed: u64, iterations: usize) -> Result<(Trace, RateReport)> {
    let inst = Instance {
        name: "qq_5x3".into(),
        problem: quadratic_quadratic(5, 3, seed.wrapping_add(1))?,
        schedule: ScheduleChoice::ConstantMetric { ratio: METRIC_RATIO },
    };
    let mut cfg = certified_config(&inst, Variant::PlAdmm, 1.0, MeritRegime::Tight)?;
    cfg.stopping = Stopping { max_iter: iterations, diff_tol: 0.0, kkt_tol: 0.0 };
    let trace = run(&inst.problem.spec, &cfg).map_err(|f| f.error)?;
    let report = analyze_merit_rates(&trace, MERIT_LAG)?;
    Ok((trace, report))
}

/// One line of the suite verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub cells: Vec<CellOutcome>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&CriterionResult> {
        self.criteria.iter().filter(|c| !c.passed).collect()
    }

    pub fn markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Acceptance suite (seed {})\n", self.seed);
        let _ = writeln!(s, "| # | criterion | result | measured |");
        let _ = writeln!(s, "|---|---|---|---|");
        for c in &self.criteria {
            let _ = writeln!(s, "| {} | {} | {} | {} |", c.id, c.name, if c.passed { "PASS" } else { "FAIL" }, c.measured);
        }
        let _ = writeln!(s, "\n## Runs\n");
        let _ = writeln!(
            s,
            "| instance | schedule | variant | rho | regime | r | iters | violations | stationarity | feasibility | member | oracle gap | max diff |"
        );
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|---|---|");
        for c in &self.cells {
            let gap = c.oracle_gap.map_or_else(|| "-".to_string(), |g| format!("{g:.2e} ({})", c.oracle_kind));
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {:.4} | {} | {} | {:.2e} | {:.2e} | {} | {} | {:.2e} |",
                c.instance,
                c.schedule,
                c.variant.name(),
                c.rho,
                c.regime.name(),
                c.r,
                c.iterations,
                c.audit.total(),
                c.kkt.stationarity,
                c.kkt.feasibility,
                c.kkt.membership,
                gap,
                c.final_dx.max(c.final_dz).max(c.final_dy),
            );
        }
        let _ = writeln!(s, "\ntotal time: {:.2} s", self.elapsed.as_secs_f64());
        s
    }
}

/// Runs every criterion. Fewer than [`MIN_INSTANCES`] instances is an error,
/// never a vacuous pass.
pub fn acceptance_suite(seed: u64) -> Result<SuiteReport> {
    acceptance_suite_with(&SuiteOptions::new(seed))
}

pub fn acceptance_suite_with(opts: &SuiteOptions) -> Result<SuiteReport> {
    let start = Instant::now();
    let instances = suite_instances(opts.seed)?;
    checks::evaluate(&instances, opts, start)
}

/// Runs every criterion on a caller-supplied instance list.
pub fn acceptance_suite_on(instances: &[Instance], opts: &SuiteOptions) -> Result<SuiteReport> {
    checks::evaluate(instances, opts, Instant::now())
}
