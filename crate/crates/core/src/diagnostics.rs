//! Quantities tracked by the convergence analysis, and audits of the
//! inequalities between them.
//!
//! Every audit returns a list of [`Violation`]s instead of asserting, so a
//! caller can run them on inadmissible configurations too. Comparisons carry
//! a relative slack of `1e-9·(1 + scale)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{dot, norm, sub, LinearMap, MetricMatrix};
use crate::params::{ConstantsBundle, MeritRegime, MetricSchedule, Variant};
use crate::solver::{IterateState, ProblemSpec};
use crate::trace::{Trace, TraceRecord};

/// Relative slack of every inequality audit.
pub const AUDIT_RTOL: f64 = 1e-9;

fn slack(scale: f64) -> f64 {
    AUDIT_RTOL * (1.0 + scale.abs())
}

/// One failed inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    /// Index of the newest iterate involved.
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "check={} k={} lhs={:?} rhs={:?}", self.check, self.k, self.lhs, self.rhs)
    }
}

/// One line per violation.
pub fn violations_to_text(v: &[Violation]) -> String {
    v.iter().map(|v| format!("{v}\n")).collect()
}

fn audit(out: &mut Vec<Violation>, check: &str, k: usize, lhs: f64, rhs: f64) {
    if lhs > rhs + slack(lhs.abs().max(rhs.abs())) {
        out.push(Violation { check: check.to_string(), k, lhs, rhs });
    }
}

/// `g(z) + h(x) + ⟨y, Ax − z⟩ + (r/2)‖Ax − z‖²`, or `+∞` when `g(z) = +∞`.
pub fn augmented_lagrangian(x: &[f64], z: &[f64], y: &[f64], problem: &ProblemSpec, r: f64) -> f64 {
    let gz = problem.g.eval(z);
    if gz == f64::INFINITY {
        return f64::INFINITY;
    }
    let res = sub(&problem.a.mv(x), z);
    gz + problem.h.eval(x) + dot(y, &res) + 0.5 * r * dot(&res, &res)
}

/// `‖A*(y − y_prev)‖`.
pub fn atdy_norm(a: &LinearMap, y: &[f64], y_prev: &[f64]) -> f64 {
    norm(&a.mtv(&sub(y, y_prev)))
}

/// The merit from its parts: `L_r + T_coef·atdy² + X_coef·dx²`.
pub fn merit_from_parts(lr: f64, atdy: f64, dx: f64, constants: &ConstantsBundle, regime: MeritRegime) -> f64 {
    let (tc, xc) = constants.merit_coefficients(regime);
    lr + tc * atdy * atdy + xc * dx * dx
}

/// `F = L_r(x, z, y) + T_coef‖A*(y − y_prev)‖² + X_coef‖x − x_prev‖²`.
#[allow(clippy::too_many_arguments)]
pub fn merit_f(
    x: &[f64],
    z: &[f64],
    y: &[f64],
    x_prev: &[f64],
    y_prev: &[f64],
    problem: &ProblemSpec,
    constants: &ConstantsBundle,
    regime: MeritRegime,
) -> f64 {
    let lr = augmented_lagrangian(x, z, y, problem, constants.inputs.r);
    merit_from_parts(lr, atdy_norm(&problem.a, y, y_prev), norm(&sub(x, x_prev)), constants, regime)
}

/// Recomputes `F_k` of `curr` from the snapshots of two consecutive records.
pub fn merit_from_records(
    curr: &TraceRecord,
    prev: &TraceRecord,
    problem: &ProblemSpec,
    constants: &ConstantsBundle,
    regime: MeritRegime,
) -> f64 {
    merit_f(&curr.x, &curr.z, &curr.y, &prev.x, &prev.y, problem, constants, regime)
}

/// The pair `(x^k, z^k, y^k) → (x^{k+1}, z^{k+1}, y^{k+1})` together with
/// the metrics `M1^k`, `M2^k` used for it.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub x0: &'a [f64],
    pub z0: &'a [f64],
    pub y0: &'a [f64],
    pub x1: &'a [f64],
    pub z1: &'a [f64],
    pub y1: &'a [f64],
    pub m1: &'a MetricMatrix,
    pub m2: &'a MetricMatrix,
}

impl<'a> Transition<'a> {
    /// The step that produced `st`.
    pub fn from_state(st: &'a IterateState, schedule: &'a MetricSchedule) -> Self {
        let k = st.k.saturating_sub(1);
        Transition {
            x0: &st.x_prev,
            z0: &st.z_prev,
            y0: &st.y_prev,
            x1: &st.x,
            z1: &st.z,
            y1: &st.y,
            m1: schedule.m1(k),
            m2: schedule.m2(k),
        }
    }

    pub fn from_records(prev: &'a TraceRecord, curr: &'a TraceRecord, schedule: &'a MetricSchedule) -> Self {
        Transition {
            x0: &prev.x,
            z0: &prev.z,
            y0: &prev.y,
            x1: &curr.x,
            z1: &curr.z,
            y1: &curr.y,
            m1: schedule.m1(prev.k),
            m2: schedule.m2(prev.k),
        }
    }
}

/// Limiting subgradient of `L_r` at the new iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientD {
    pub dx: Vec<f64>,
    pub dz: Vec<f64>,
    pub dy: Vec<f64>,
    pub norm: f64,
}

/// Subgradient of the merit, in the five blocks `(x, z, y, x′, y′)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientBigD {
    pub dx: Vec<f64>,
    pub dz: Vec<f64>,
    pub dy: Vec<f64>,
    pub dx_prime: Vec<f64>,
    pub dy_prime: Vec<f64>,
    pub norm: f64,
}

fn block_norm(blocks: &[&[f64]]) -> f64 {
    blocks.iter().map(|b| dot(b, b)).sum::<f64>().sqrt()
}

/// ```text
/// d_x = C2(∇h(x1) − ∇h(x0)) + A*(y1 − y0) + M1(x0 − x1)
/// d_z = y0 − y1 + rA(x0 − x1) + M2(z0 − z1)
/// d_y = (y1 − y0)/(ρr)
/// ```
pub fn subgradient_d(t: &Transition<'_>, problem: &ProblemSpec, constants: &ConstantsBundle) -> SubgradientD {
    let a = &problem.a;
    let (r, rho) = (constants.inputs.r, constants.inputs.rho);
    let dy_vec = sub(t.y1, t.y0);
    let back_x = sub(t.x0, t.x1);
    let mut dx = a.mtv(&dy_vec);
    let m1b = t.m1.mv(&back_x);
    for (d, m) in dx.iter_mut().zip(&m1b) {
        *d += m;
    }
    if constants.c2 != 0.0 {
        let g1 = problem.h.grad(t.x1);
        let g0 = problem.h.grad(t.x0);
        for i in 0..dx.len() {
            dx[i] += constants.c2 * (g1[i] - g0[i]);
        }
    }
    let abx = a.mv(&back_x);
    let m2b = t.m2.mv(&sub(t.z0, t.z1));
    let dz: Vec<f64> = (0..dy_vec.len()).map(|i| -dy_vec[i] + r * abx[i] + m2b[i]).collect();
    let dy: Vec<f64> = dy_vec.iter().map(|v| v / (rho * r)).collect();
    let n = block_norm(&[&dx, &dz, &dy]);
    SubgradientD { dx, dz, dy, norm: n }
}

/// Coefficient of `AA*Δy` in the y-block of the merit subgradient.
pub fn t2_coefficient(constants: &ConstantsBundle, regime: MeritRegime) -> f64 {
    match regime {
        MeritRegime::Standard => 2.0 * constants.t0,
        MeritRegime::Tight => 4.0 * constants.t0,
    }
}

/// `D = (d_x + C0Δx, d_z, d_y + c·AA*Δy, −C0Δx, −c·AA*Δy)` with `c` from
/// [`t2_coefficient`].
pub fn subgradient_big_d(
    t: &Transition<'_>,
    problem: &ProblemSpec,
    constants: &ConstantsBundle,
    regime: MeritRegime,
) -> SubgradientBigD {
    let d = subgradient_d(t, problem, constants);
    let a = &problem.a;
    let step_x = sub(t.x1, t.x0);
    let aaty = a.mv(&a.mtv(&sub(t.y1, t.y0)));
    let c = t2_coefficient(constants, regime);
    let xp: Vec<f64> = step_x.iter().map(|v| constants.c0 * v).collect();
    let yp: Vec<f64> = aaty.iter().map(|v| c * v).collect();
    let dx: Vec<f64> = d.dx.iter().zip(&xp).map(|(a, b)| a + b).collect();
    let dy: Vec<f64> = d.dy.iter().zip(&yp).map(|(a, b)| a + b).collect();
    let dx_prime: Vec<f64> = xp.iter().map(|v| -v).collect();
    let dy_prime: Vec<f64> = yp.iter().map(|v| -v).collect();
    let n = block_norm(&[&dx, &d.dz, &dy, &dx_prime, &dy_prime]);
    SubgradientBigD { dx, dz: d.dz, dy, dx_prime, dy_prime, norm: n }
}

/// Residual of the x-subproblem optimality condition, and its scale.
///
/// P-ADMM: `∇h(x1) + A*y0 + rA*(Ax1 − z1) − M1(x0 − x1)`.
/// PL-ADMM: the same with `∇h(x0)`.
pub fn x_step_residual(t: &Transition<'_>, problem: &ProblemSpec, r: f64, variant: Variant) -> (f64, f64) {
    let a = &problem.a;
    let grad = match variant {
        Variant::PAdmm => problem.h.grad(t.x1),
        Variant::PlAdmm => problem.h.grad(t.x0),
    };
    let aty = a.mtv(t.y0);
    let pen: Vec<f64> = a.mtv(&sub(&a.mv(t.x1), t.z1)).iter().map(|v| r * v).collect();
    let m1 = t.m1.mv(&sub(t.x0, t.x1));
    let res: Vec<f64> = (0..grad.len()).map(|i| grad[i] + aty[i] + pen[i] - m1[i]).collect();
    let scale = [norm(&grad), norm(&aty), norm(&pen), norm(&m1)].into_iter().fold(0.0, f64::max);
    (norm(&res), scale)
}

/// `‖y1 − y0 − ρr(Ax1 − z1)‖` and its scale.
pub fn multiplier_residual(t: &Transition<'_>, a: &LinearMap, r: f64, rho: f64) -> (f64, f64) {
    let res = sub(&a.mv(t.x1), t.z1);
    let dy = sub(t.y1, t.y0);
    let diff: Vec<f64> = dy.iter().zip(&res).map(|(d, e)| d - rho * r * e).collect();
    (norm(&diff), norm(&dy))
}

fn state_record(
    k: usize,
    x: &[f64],
    z: &[f64],
    y: &[f64],
    problem: &ProblemSpec,
    r: f64,
) -> TraceRecord {
    let a = &problem.a;
    let grad = problem.h.grad(x);
    let mut stat = a.mtv(y);
    for (s, g) in stat.iter_mut().zip(&grad) {
        *s += g;
    }
    let lr = augmented_lagrangian(x, z, y, problem, r);
    TraceRecord {
        k,
        x: x.to_vec(),
        z: z.to_vec(),
        y: y.to_vec(),
        dx: 0.0,
        dz: 0.0,
        dy: 0.0,
        atdy: 0.0,
        m2dz2: 0.0,
        grad_norm: norm(&grad),
        lr,
        fk: lr,
        obj: problem.h.eval(x) + problem.g.eval(z),
        d_norm: 0.0,
        big_d_norm: 0.0,
        feas: norm(&sub(&a.mv(x), z)),
        stat: norm(&stat),
    }
}

/// Record for the starting point: no transition, so every difference and
/// subgradient entry is zero and `F_0 = L_r`.
pub fn initial_record(
    st: &IterateState,
    problem: &ProblemSpec,
    _constants: &ConstantsBundle,
    _regime: MeritRegime,
    r: f64,
) -> TraceRecord {
    state_record(st.k, &st.x, &st.z, &st.y, problem, r)
}

/// Record for the iterate `st`, auditing the step that produced it.
pub fn build_record(
    st: &IterateState,
    problem: &ProblemSpec,
    constants: &ConstantsBundle,
    schedule: &MetricSchedule,
    regime: MeritRegime,
    r: f64,
    _rho: f64,
) -> TraceRecord {
    let mut rec = state_record(st.k, &st.x, &st.z, &st.y, problem, r);
    let t = Transition::from_state(st, schedule);
    let dz_vec = sub(&st.z, &st.z_prev);
    rec.dx = norm(&sub(&st.x, &st.x_prev));
    rec.dz = norm(&dz_vec);
    rec.dy = norm(&sub(&st.y, &st.y_prev));
    rec.atdy = atdy_norm(&problem.a, &st.y, &st.y_prev);
    rec.m2dz2 = dot(&t.m2.mv(&dz_vec), &dz_vec);
    rec.fk = merit_from_parts(rec.lr, rec.atdy, rec.dx, constants, regime);
    rec.d_norm = subgradient_d(&t, problem, constants).norm;
    rec.big_d_norm = subgradient_big_d(&t, problem, constants, regime).norm;
    rec
}

fn require_regime(trace: &Trace, regime: MeritRegime) -> Result<()> {
    if trace.header.regime != regime {
        return Err(Error::InvalidInput(format!(
            "trace was recorded in the {} regime, not {}",
            trace.header.regime.name(),
            regime.name()
        )));
    }
    Ok(())
}

/// Sufficient decrease of the merit for every `k ≥ 1`:
///
/// ```text
/// F_{k+1} + (C0/4)‖Δx‖² + ½‖Δz‖²_{M2} [+ ‖Δy‖²/(ρr)] ≤ F_k
/// ```
///
/// The bracketed term applies in the tight regime. Pairs with a
/// non-finite merit are skipped.
pub fn descent_check(trace: &Trace, constants: &ConstantsBundle, regime: MeritRegime) -> Result<Vec<Violation>> {
    require_regime(trace, regime)?;
    let rr = constants.inputs.rho * constants.inputs.r;
    let mut out = Vec::new();
    for w in trace.records.windows(2).skip(1) {
        let (prev, curr) = (&w[0], &w[1]);
        if !prev.fk.is_finite() || !curr.fk.is_finite() {
            continue;
        }
        let mut lhs = curr.fk + 0.25 * constants.c0 * curr.dx * curr.dx + 0.5 * curr.m2dz2;
        if regime == MeritRegime::Tight {
            lhs += curr.dy * curr.dy / rr;
        }
        let rhs = prev.fk;
        if lhs > rhs + slack(prev.fk) {
            out.push(Violation { check: "descent".into(), k: curr.k, lhs, rhs });
        }
    }
    Ok(out)
}

/// The three iterate estimates:
///
/// ```text
/// (i)   ‖Δz^{k+1}‖ ≤ ‖A‖‖Δx^{k+1}‖ + (‖Δy^{k+1}‖ + ‖Δy^k‖)/(ρr)           k ≥ 1
/// (ii)  ‖y^{k+1}‖²/(2r) ≤ (T0/2)‖A*Δy^{k+1}‖² + (T1/r)‖∇h(x^{k+1})‖²
///                         + (C0/4)‖Δx^{k+1}‖²                              k ≥ 0
/// (iii) ‖Δy^{k+1}‖ ≤ C3‖Δx^{k+1}‖ + C4‖Δx^k‖
///                    + T2(‖A*Δy^k‖ − ‖A*Δy^{k+1}‖)                        k ≥ 1
/// ```
pub fn iterate_estimates_check(trace: &Trace, constants: &ConstantsBundle) -> Vec<Violation> {
    let c = constants;
    let (r, rr, na) = (c.inputs.r, c.inputs.rho * c.inputs.r, c.inputs.norm_a);
    let recs = &trace.records;
    let mut out = Vec::new();
    for j in 1..recs.len() {
        let cur = &recs[j];
        let y2 = dot(&cur.y, &cur.y);
        let lhs = y2 / (2.0 * r);
        let rhs = 0.5 * c.t0 * cur.atdy * cur.atdy + c.t1 / r * cur.grad_norm * cur.grad_norm
            + 0.25 * c.c0 * cur.dx * cur.dx;
        audit(&mut out, "estimate_multiplier", cur.k, lhs, rhs);
        if j >= 2 {
            let prev = &recs[j - 1];
            audit(&mut out, "estimate_z", cur.k, cur.dz, na * cur.dx + (cur.dy + prev.dy) / rr);
            let rhs = c.c3 * cur.dx + c.c4 * prev.dx + c.t2 * (prev.atdy - cur.atdy);
            audit(&mut out, "estimate_y", cur.k, cur.dy, rhs);
        }
    }
    out
}

/// `‖d^{k+1}‖ ≤ C5‖Δx‖ + C6‖Δz‖ + C7‖Δy‖` on every transition.
pub fn bound_check_d(trace: &Trace, constants: &ConstantsBundle) -> Vec<Violation> {
    let c = constants;
    let mut out = Vec::new();
    for rec in trace.records.iter().skip(1) {
        audit(&mut out, "bound_d", rec.k, rec.d_norm, c.c5 * rec.dx + c.c6 * rec.dz + c.c7 * rec.dy);
    }
    out
}

/// Bounds on the merit subgradient norm.
///
/// Standard regime: the one-step form `C8‖Δx‖ + C9‖Δz‖ + C10‖Δy‖` on every
/// transition and, for `k ≥ 2`, the three-step form
/// `C11(‖Δx^{k+1}‖ + ‖Δx^k‖ + ‖Δx^{k−1}‖) + C12(‖A*Δy^k‖ − ‖A*Δy^{k+1}‖)
/// + C13(‖A*Δy^{k−1}‖ − ‖A*Δy^k‖)`.
///
/// Tight regime, `k ≥ 1`: `C14‖Δx^{k+1}‖ + C15‖Δy^{k+1}‖ + C16‖Δy^k‖`.
pub fn bound_check_big_d(trace: &Trace, constants: &ConstantsBundle, regime: MeritRegime) -> Result<Vec<Violation>> {
    require_regime(trace, regime)?;
    let c = constants;
    let recs = &trace.records;
    let mut out = Vec::new();
    for j in 1..recs.len() {
        let cur = &recs[j];
        match regime {
            MeritRegime::Standard => {
                audit(&mut out, "bound_D", cur.k, cur.big_d_norm, c.c8 * cur.dx + c.c9 * cur.dz + c.c10 * cur.dy);
                if j >= 3 {
                    let (p, pp) = (&recs[j - 1], &recs[j - 2]);
                    let rhs = c.c11 * (cur.dx + p.dx + pp.dx)
                        + c.c12 * (p.atdy - cur.atdy)
                        + c.c13 * (pp.atdy - p.atdy);
                    audit(&mut out, "bound_D_three_step", cur.k, cur.big_d_norm, rhs);
                }
            }
            MeritRegime::Tight => {
                if j >= 2 {
                    let p = &recs[j - 1];
                    let rhs = c.c14 * cur.dx + c.c15 * cur.dy + c.c16 * p.dy;
                    audit(&mut out, "bound_D_tight", cur.k, cur.big_d_norm, rhs);
                }
            }
        }
    }
    Ok(out)
}

/// The three KKT gaps at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    /// `‖A*y + ∇h(x)‖`.
    pub stationarity: f64,
    /// `y ∈ ∂g(z)` at the given tolerance.
    pub membership: bool,
    /// `‖Ax − z‖`.
    pub feasibility: f64,
}

impl KktResidual {
    pub fn holds(&self, tol: f64) -> bool {
        self.stationarity <= tol && self.feasibility <= tol && self.membership
    }
}

pub fn kkt_residual(x: &[f64], z: &[f64], y: &[f64], problem: &ProblemSpec, tol: f64) -> KktResidual {
    let a = &problem.a;
    let mut s = a.mtv(y);
    for (si, gi) in s.iter_mut().zip(problem.h.grad(x)) {
        *si += gi;
    }
    KktResidual {
        stationarity: norm(&s),
        membership: problem.g.subdiff_member(z, y, tol),
        feasibility: norm(&sub(&a.mv(x), z)),
    }
}

/// Which boundedness guarantee for the iterates applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundedness {
    /// `A` invertible, `g` coercive, `h` bounded below.
    InvertibleA,
    /// `h` coercive, `g` and `h` bounded below.
    CoerciveH,
    /// Neither applies: iterates are not guaranteed to stay bounded.
    Unknown,
}

impl Boundedness {
    pub fn name(self) -> &'static str {
        match self {
            Boundedness::InvertibleA => "invertible_a",
            Boundedness::CoerciveH => "coercive_h",
            Boundedness::Unknown => "unknown",
        }
    }

    pub fn warning(self) -> Option<&'static str> {
        match self {
            Boundedness::Unknown => Some("boundedness of the iterates is not guaranteed"),
            _ => None,
        }
    }
}

pub fn boundedness_precheck(problem: &ProblemSpec) -> Boundedness {
    let (h, g, a) = (&problem.h, &problem.g, &problem.a);
    let invertible = a.rows() == a.cols() && a.lambda_min_ata() > 1e-10;
    if invertible && g.coercive() && h.bounded_below() {
        Boundedness::InvertibleA
    } else if h.coercive() && g.bounded_below() && h.bounded_below() {
        Boundedness::CoerciveH
    } else {
        Boundedness::Unknown
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummabilityResult {
    pub bound: f64,
    pub actual: f64,
    pub ok: bool,
}

/// Upper bound on `Σ_{k=K_lo}^{K_hi} a_i^k` for nonnegative sequences
/// obeying the three-term recurrence with weights `c0, c1, c2`.
///
/// `a[k][j]` is component `j` of the `k`-th vector.
#[allow(clippy::too_many_arguments)]
pub fn summability_bound(
    a: &[Vec<f64>],
    c0: &[f64],
    c1: &[f64],
    c2: &[f64],
    delta_bar: f64,
    k_lo: usize,
    k_hi: usize,
    i: usize,
) -> Result<SummabilityResult> {
    let n = c0.len();
    if c1.len() != n || c2.len() != n || i >= n {
        return Err(Error::Dimension("summability: weight lengths must agree and include i".into()));
    }
    if k_hi < k_lo || k_hi >= a.len() || k_lo + 2 >= a.len() {
        return Err(Error::InvalidInput("summability: window outside the sequence".into()));
    }
    if a.iter().any(|v| v.len() != n || v.iter().any(|x| *x < 0.0)) {
        return Err(Error::InvalidInput("summability: sequence must be nonnegative N-vectors".into()));
    }
    if (0..n).any(|j| c0[j] + c1[j] + c2[j] >= 1.0) {
        return Err(Error::InvalidInput("summability: needs c0 + c1 + c2 < 1 componentwise".into()));
    }
    let head: f64 = (0..n)
        .map(|j| {
            (1.0 - c0[j] - c1[j]) * a[k_lo][j] + (1.0 - c0[j]) * a[k_lo + 1][j] + a[k_lo + 2][j]
        })
        .sum();
    let bound = (head + delta_bar) / (1.0 - c0[i] - c1[i] - c2[i]);
    let actual: f64 = a[k_lo..=k_hi].iter().map(|v| v[i]).sum();
    Ok(SummabilityResult { bound, actual, ok: actual <= bound + 1e-12 })
}

/// All audits of one trace, grouped by check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub descent: Vec<Violation>,
    pub estimates: Vec<Violation>,
    pub bound_d: Vec<Violation>,
    pub bound_big_d: Vec<Violation>,
}

impl AuditReport {
    pub fn total(&self) -> usize {
        self.descent.len() + self.estimates.len() + self.bound_d.len() + self.bound_big_d.len()
    }

    pub fn all(&self) -> impl Iterator<Item = &Violation> {
        self.descent.iter().chain(&self.estimates).chain(&self.bound_d).chain(&self.bound_big_d)
    }
}

/// Runs every audit against the constants and regime stored in the trace.
pub fn audit_trace(trace: &Trace) -> AuditReport {
    let c = &trace.header.constants;
    let regime = trace.header.regime;
    AuditReport {
        descent: descent_check(trace, c, regime).expect("regime taken from the trace"),
        estimates: iterate_estimates_check(trace, c),
        bound_d: bound_check_d(trace, c),
        bound_big_d: bound_check_big_d(trace, c, regime).expect("regime taken from the trace"),
    }
}
