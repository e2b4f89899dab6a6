//! Seeded desk-scale test problems with oracles.
//!
//! All instances have `h(x) = ½‖Bx − b‖²` with `B` square and well
//! conditioned, scaled so that `L = λ_max(B*B) = 1`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{kkt_residual, KktResidual};
use crate::error::{Error, Result};
use crate::functions::{ProxFunction, Quadratic, SmoothFunction};
use crate::linops::{cholesky, cholesky_solve, dot, LinearMap, MetricMatrix};
use crate::params::{MeritRegime, MetricSchedule, Variant};
use crate::rng::Lcg;
use crate::solver::{IterateState, ProblemSpec, Solver, SolverConfig, Stopping, XSolver};

/// Surjectivity threshold for generated `A`.
pub const SURJECTIVITY_TOL: f64 = 1e-8;
const MAX_RESEEDS: u64 = 10;

/// Reference point attached to a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Oracle {
    /// Unique KKT point from a linear solve.
    ClosedForm { x: Vec<f64>, z: Vec<f64>, y: Vec<f64> },
    /// Global minimizer over all supports, with its KKT multiplier.
    SupportEnumeration { x: Vec<f64>, z: Vec<f64>, y: Vec<f64>, value: f64 },
    /// Best grid point of the objective.
    GridSearch { x: Vec<f64>, value: f64, step: f64 },
    /// Long solver run; a reference, not ground truth.
    Reference { x: Vec<f64>, z: Vec<f64>, y: Vec<f64>, iterations: usize },
    None,
}

impl Oracle {
    pub fn x(&self) -> Option<&[f64]> {
        match self {
            Oracle::ClosedForm { x, .. }
            | Oracle::SupportEnumeration { x, .. }
            | Oracle::GridSearch { x, .. }
            | Oracle::Reference { x, .. } => Some(x),
            Oracle::None => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Oracle::ClosedForm { .. } => "closed_form",
            Oracle::SupportEnumeration { .. } => "support_enumeration",
            Oracle::GridSearch { .. } => "grid_search",
            Oracle::Reference { .. } => "reference",
            Oracle::None => "none",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestProblem {
    pub spec: ProblemSpec,
    pub oracle: Oracle,
    pub seed: u64,
    pub descriptor: String,
}

/// Generator parameters, as they appear in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum ProblemDescriptor {
    QuadraticQuadratic { n: usize, m: usize, seed: u64 },
    Lasso { n: usize, m: usize, sparsity: usize, lambda: f64, seed: u64 },
    L0LeastSquares { n: usize, lambda: f64, seed: u64 },
}

impl ProblemDescriptor {
    pub fn build(&self) -> Result<TestProblem> {
        match *self {
            ProblemDescriptor::QuadraticQuadratic { n, m, seed } => quadratic_quadratic(n, m, seed),
            ProblemDescriptor::Lasso { n, m, sparsity, lambda, seed } => lasso_problem(n, m, sparsity, lambda, seed),
            ProblemDescriptor::L0LeastSquares { n, lambda, seed } => l0_least_squares(n, n, lambda, seed),
        }
    }
}

/// `I + 0.3R/√n` with `R` uniform in `[−1, 1]`, scaled to unit norm.
fn random_b(n: usize, rng: &mut Lcg) -> Result<LinearMap> {
    let s = 0.3 / (n as f64).sqrt();
    let mut data = rng.uniform_vec(n * n, -s, s);
    for i in 0..n {
        data[i * n + i] += 1.0;
    }
    let b = LinearMap::new(n, n, data)?;
    let scale = 1.0 / b.op_norm();
    LinearMap::new(n, n, b.data().iter().map(|v| v * scale).collect())
}

/// `[I_m | 0] + 0.2R`.
fn random_a(m: usize, n: usize, rng: &mut Lcg) -> Result<LinearMap> {
    let mut data = rng.uniform_vec(m * n, -0.2, 0.2);
    for i in 0..m {
        data[i * n + i] += 1.0;
    }
    LinearMap::new(m, n, data)
}

fn least_squares_h(b_mat: &LinearMap, b: &[f64]) -> Result<Arc<dyn SmoothFunction>> {
    Ok(Arc::new(Quadratic::least_squares(b_mat, b)?))
}

fn well_posed(b_mat: &LinearMap, a: &LinearMap) -> bool {
    a.lambda_min_aat() > SURJECTIVITY_TOL && b_mat.lambda_min_ata() > SURJECTIVITY_TOL
}

fn reseeding<T>(seed: u64, mut draw: impl FnMut(&mut Lcg) -> Result<Option<T>>) -> Result<T> {
    for attempt in 0..MAX_RESEEDS {
        let mut rng = Lcg::new(seed.wrapping_add(attempt.wrapping_mul(0x0010_0000_0001)));
        if let Some(v) = draw(&mut rng)? {
            return Ok(v);
        }
    }
    Err(Error::Numerical(format!("rank-deficient draws for {MAX_RESEEDS} seeds starting at {seed}")))
}

/// `h = ½‖Bx − b‖²`, `g = (λg/2)‖z − c‖²` with the unique KKT point from
/// `(B*B + λg A*A)x̂ = B*b + λg A*c`, `ẑ = Ax̂`, `ŷ = λg(ẑ − c)`.
pub fn quadratic_quadratic_from_data(
    b_mat: LinearMap,
    b: Vec<f64>,
    lambda_g: f64,
    c: Vec<f64>,
    a: LinearMap,
) -> Result<TestProblem> {
    let (n, m) = (a.cols(), a.rows());
    if b_mat.cols() != n || b.len() != b_mat.rows() || c.len() != m {
        return Err(Error::Dimension("quadratic_quadratic: inconsistent sizes".into()));
    }
    let h = least_squares_h(&b_mat, &b)?;
    let ata = a.gram_ata();
    let sys: Vec<f64> = b_mat.gram_ata().iter().zip(&ata).map(|(p, q)| p + lambda_g * q).collect();
    let mut rhs = b_mat.adjoint(&b)?;
    for (r, v) in rhs.iter_mut().zip(a.adjoint(&c)?) {
        *r += lambda_g * v;
    }
    let l = cholesky(&sys, n).map_err(|e| Error::Numerical(format!("KKT system singular: {e}")))?;
    let x = cholesky_solve(&l, n, &rhs);
    let z = a.apply(&x)?;
    let y: Vec<f64> = z.iter().zip(&c).map(|(zi, ci)| lambda_g * (zi - ci)).collect();
    let g = ProxFunction::Quadratic { lambda: lambda_g, c };
    let spec = ProblemSpec::new(h, g, a)?;
    Ok(TestProblem {
        spec,
        oracle: Oracle::ClosedForm { x, z, y },
        seed: 0,
        descriptor: format!("quadratic_quadratic n={n} m={m} data"),
    })
}

/// Seeded smooth-plus-smooth instance with `λg = 1`.
pub fn quadratic_quadratic(n: usize, m: usize, seed: u64) -> Result<TestProblem> {
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("quadratic_quadratic needs 1 <= m <= n, got m={m}, n={n}")));
    }
    let mut tp = reseeding(seed, |rng| {
        let b_mat = random_b(n, rng)?;
        let a = random_a(m, n, rng)?;
        if !well_posed(&b_mat, &a) {
            return Ok(None);
        }
        let b = rng.uniform_vec(n, -1.0, 1.0);
        let c = rng.uniform_vec(m, -1.0, 1.0);
        quadratic_quadratic_from_data(b_mat, b, 1.0, c, a).map(Some)
    })?;
    tp.seed = seed;
    tp.descriptor = format!("quadratic_quadratic n={n} m={m} seed={seed}");
    Ok(tp)
}

/// Finest step of the coarse-to-fine lasso grid oracle for `n ≤ 2`.
pub const LASSO_GRID_STEP: f64 = 1e-6;
/// Iterations and tolerance of the lasso reference run.
pub const REFERENCE_ITERS: usize = 100_000;
pub const REFERENCE_TOL: f64 = 1e-13;

/// `h = ½‖Bx − b‖²`, `g = λ‖·‖₁`, oracle attached.
pub fn lasso_from_data(b_mat: LinearMap, b: Vec<f64>, a: LinearMap, lambda: f64) -> Result<TestProblem> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput("lasso needs lambda > 0".into()));
    }
    let h = least_squares_h(&b_mat, &b)?;
    let spec = ProblemSpec::new(h, ProxFunction::L1 { lambda }, a)?;
    let oracle = if spec.n() <= 2 { lasso_grid_oracle(&spec)? } else { reference_run(&spec)? };
    let descriptor = format!("lasso n={} m={} lambda={lambda} data", spec.n(), spec.m());
    Ok(TestProblem { spec, oracle, seed: 0, descriptor })
}

fn lasso_grid_oracle(spec: &ProblemSpec) -> Result<Oracle> {
    let n = spec.n();
    // Any minimizer has h(x) ≤ h(0) + g(0) = h(0), which bounds ‖x‖ through
    // the smallest curvature of h.
    let q = spec.h.as_quadratic().ok_or_else(|| Error::Unsupported("grid oracle needs quadratic h".into()))?;
    let curv = crate::linops::min_eigenvalue(q.hessian(), n);
    if !(curv > 0.0) {
        return Err(Error::Unsupported("grid oracle needs strongly convex h".into()));
    }
    let zero = vec![0.0; n];
    let radius = (dot(q.linear_term(), q.linear_term()).sqrt() + (2.0 * curv * spec.h.eval(&zero)).sqrt()) / curv + 1.0;
    let mut center = zero;
    let mut half = radius;
    let mut step = 1e-2;
    let mut value = f64::INFINITY;
    while step >= LASSO_GRID_STEP * 0.99 {
        let count = (2.0 * half / step).ceil() as usize + 1;
        let pt = |c: f64, i: usize| c - half + i as f64 * step;
        let mut best = (f64::INFINITY, center.clone());
        let mut consider = |x: Vec<f64>| {
            let v = spec.objective(&x);
            if v < best.0 {
                best = (v, x);
            }
        };
        match n {
            1 => (0..count).for_each(|i| consider(vec![pt(center[0], i)])),
            2 => {
                for i in 0..count {
                    for j in 0..count {
                        consider(vec![pt(center[0], i), pt(center[1], j)]);
                    }
                }
            }
            _ => return Err(Error::InvalidInput("grid oracle supports n <= 2".into())),
        }
        (value, center) = best;
        half = 2.0 * step;
        step /= 100.0;
    }
    Ok(Oracle::GridSearch { x: center, value, step: step * 100.0 })
}

/// Plain ADMM (`M1 = M2 = 0`, `ρ = 1`, exact x-step), which converges on
/// convex instances whether or not the nonconvex certificate applies.
fn reference_run(spec: &ProblemSpec) -> Result<Oracle> {
    let (n, m) = (spec.n(), spec.m());
    let mut cfg = SolverConfig::new(Variant::PAdmm, 1.0, 1.0, MetricSchedule::zero(n, m), XSolver::QuadraticClosedForm);
    cfg.allow_uncertified = true;
    cfg.regime = MeritRegime::Standard;
    cfg.stopping = Stopping { max_iter: REFERENCE_ITERS, diff_tol: REFERENCE_TOL, kkt_tol: 0.0 };
    let solver = match Solver::new(spec, &cfg) {
        Ok(s) => s,
        Err(Error::Numerical(_)) => {
            // A*A + H singular: add a small proximal term.
            cfg.schedule = MetricSchedule::constant(MetricMatrix::scaled_identity(n, 1e-3), MetricMatrix::zeros(m))?;
            return reference_with(spec, &cfg);
        }
        Err(e) => return Err(e),
    };
    drive(&solver, cfg.stopping)
}

fn reference_with(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<Oracle> {
    let solver = Solver::new(spec, cfg)?;
    drive(&solver, cfg.stopping)
}

fn drive(solver: &Solver<'_>, stop: Stopping) -> Result<Oracle> {
    let mut st: IterateState = solver.initial_state();
    let mut iterations = 0;
    for _ in 0..stop.max_iter {
        let next = solver.step(&st)?;
        iterations += 1;
        let moved: f64 = [(&next.x, &st.x), (&next.z, &st.z), (&next.y, &st.y)]
            .iter()
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
            .sum();
        st = next;
        if moved <= stop.diff_tol {
            break;
        }
    }
    Ok(Oracle::Reference { x: st.x, z: st.z, y: st.y, iterations })
}

/// Seeded lasso instance: `b = Bx_true + noise` with a `sparsity`-sparse
/// `x_true`.
pub fn lasso_problem(n: usize, m: usize, sparsity: usize, lambda: f64, seed: u64) -> Result<TestProblem> {
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("lasso needs 1 <= m <= n, got m={m}, n={n}")));
    }
    let mut tp = reseeding(seed, |rng| {
        let b_mat = random_b(n, rng)?;
        let a = random_a(m, n, rng)?;
        if !well_posed(&b_mat, &a) {
            return Ok(None);
        }
        let mut x_true = vec![0.0; n];
        for (i, v) in x_true.iter_mut().enumerate().take(sparsity.min(n)) {
            *v = if i % 2 == 0 { 1.0 } else { -1.0 } * rng.uniform(0.5, 1.5);
        }
        let mut b = b_mat.apply(&x_true)?;
        for v in b.iter_mut() {
            *v += rng.uniform(-0.05, 0.05);
        }
        lasso_from_data(b_mat, b, a, lambda).map(Some)
    })?;
    tp.seed = seed;
    tp.descriptor = format!("lasso n={n} m={m} sparsity={sparsity} lambda={lambda} seed={seed}");
    Ok(tp)
}

/// Largest `n` for support enumeration.
pub const MAX_ENUMERATION_DIM: usize = 10;

/// `h = ½‖Bx − b‖²`, `g = λ‖·‖₀`, `A = I`, with the global minimizer found
/// by enumerating all supports. The multiplier is `ŷ = −∇h(x̂)`, which
/// vanishes on the support.
pub fn l0_from_data(b_mat: LinearMap, b: Vec<f64>, lambda: f64) -> Result<TestProblem> {
    let n = b_mat.cols();
    if n > MAX_ENUMERATION_DIM {
        return Err(Error::InvalidInput(format!("support enumeration needs n <= {MAX_ENUMERATION_DIM}")));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidInput("l0 weight must be nonnegative".into()));
    }
    let q = Quadratic::least_squares(&b_mat, &b)?;
    let (hess, lin) = (q.hessian().to_vec(), q.linear_term().to_vec());
    let mut best: (f64, Vec<f64>) = (f64::INFINITY, vec![0.0; n]);
    for mask in 0u32..(1u32 << n) {
        let sup: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let s = sup.len();
        let mut x = vec![0.0; n];
        if s > 0 {
            let sys: Vec<f64> = sup.iter().flat_map(|&i| sup.iter().map(move |&j| (i, j))).map(|(i, j)| hess[i * n + j]).collect();
            let rhs: Vec<f64> = sup.iter().map(|&i| lin[i]).collect();
            let l = cholesky(&sys, s)?;
            for (v, &i) in cholesky_solve(&l, s, &rhs).into_iter().zip(&sup) {
                x[i] = v;
            }
        }
        let val = q.eval(&x) + lambda * x.iter().filter(|v| **v != 0.0).count() as f64;
        if val < best.0 {
            best = (val, x);
        }
    }
    let x = best.1;
    let y: Vec<f64> = q.grad(&x).iter().map(|g| -g).collect();
    let spec = ProblemSpec::new(Arc::new(q), ProxFunction::L0 { lambda }, LinearMap::identity(n))?;
    Ok(TestProblem {
        spec,
        oracle: Oracle::SupportEnumeration { z: x.clone(), x, y, value: best.0 },
        seed: 0,
        descriptor: format!("l0_least_squares n={n} lambda={lambda} data"),
    })
}

/// Seeded `ℓ0` instance. Only `A = I` is generated, so `m` must equal `n`.
pub fn l0_least_squares(n: usize, m: usize, lambda: f64, seed: u64) -> Result<TestProblem> {
    if m != n {
        return Err(Error::InvalidInput("l0_least_squares uses A = I, so m must equal n".into()));
    }
    if n > MAX_ENUMERATION_DIM {
        return Err(Error::InvalidInput(format!("support enumeration needs n <= {MAX_ENUMERATION_DIM}")));
    }
    let mut tp = reseeding(seed, |rng| {
        let b_mat = random_b(n, rng)?;
        if b_mat.lambda_min_ata() <= SURJECTIVITY_TOL {
            return Ok(None);
        }
        let b = rng.uniform_vec(n, -1.0, 1.0);
        l0_from_data(b_mat, b, lambda).map(Some)
    })?;
    tp.seed = seed;
    tp.descriptor = format!("l0_least_squares n={n} lambda={lambda} seed={seed}");
    Ok(tp)
}

/// All three KKT conditions at tolerance `tol`.
pub fn kkt_check(problem: &ProblemSpec, x: &[f64], z: &[f64], y: &[f64], tol: f64) -> (bool, KktResidual) {
    let res = kkt_residual(x, z, y, problem, tol);
    (res.holds(tol), res)
}

/// `‖x − x̂‖` against the oracle, when it has a point.
pub fn oracle_distance(tp: &TestProblem, x: &[f64]) -> Option<f64> {
    tp.oracle.x().map(|o| dot(&crate::linops::sub(x, o), &crate::linops::sub(x, o)).sqrt())
}
