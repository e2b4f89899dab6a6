//! Algorithm constants, metric schedules and admissibility certificates.
//!
//! Every constant is evaluated once from its defining formula and the
//! composite ones are derived from the stored fields, so identities such as
//! `C8 = C5 + 2·C0` hold bit for bit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{min_eigenvalue, LinearMap, MetricMatrix, PSD_TOL};

/// Default `γ` in the lower bound `r ≥ (2 + γ)·T1·L`.
pub const DEFAULT_GAMMA: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Proximal ADMM: the x-subproblem keeps `h` exactly.
    #[serde(rename = "padmm")]
    PAdmm,
    /// Proximal linearized ADMM: `h` is linearized at `x^k`.
    #[serde(rename = "pladmm")]
    PlAdmm,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::PAdmm => "padmm",
            Variant::PlAdmm => "pladmm",
        }
    }
}

/// Which merit function and descent inequality a run is audited against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeritRegime {
    /// `F = L_r + T0‖A*Δy‖² + (C0/2)‖Δx‖²`, certified by [`check_assumption`].
    Standard,
    /// `F = L_r + 2T0‖A*Δy‖² + C0‖Δx‖²`, certified by
    /// [`check_strengthened_assumption`].
    Tight,
}

impl MeritRegime {
    pub fn name(self) -> &'static str {
        match self {
            MeritRegime::Standard => "standard",
            MeritRegime::Tight => "tight",
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("relaxation rho must lie in (0, 2), got {rho}")))
    }
}

/// `(T0, T1)` for relaxation `ρ`, penalty `r` and `λ = λ_min(AA*)`.
pub fn relaxation_constants(rho: f64, r: f64, lam_min_aat: f64) -> Result<(f64, f64)> {
    check_rho(rho)?;
    if !(lam_min_aat > 0.0) {
        return Err(Error::InvalidInput("A must be surjective (lambda_min(AA*) > 0)".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidInput("penalty r must be positive".into()));
    }
    let lam = lam_min_aat;
    Ok(if rho <= 1.0 {
        ((1.0 - rho) / (lam * rho * rho * r), 1.0 / (lam * rho))
    } else {
        ((rho - 1.0) / (lam * (2.0 - rho) * rho * r), rho / (lam * (2.0 - rho) * (2.0 - rho)))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_m: f64,
    pub c_m_prime: f64,
}

/// Variant-dependent constants `C0, C1, C2, C_M, C_M′`.
///
/// `C2` is the weight of `∇h(x^{k+1}) − ∇h(x^k)` in the x-block of the
/// Lagrangian subgradient. It is 1 for the linearized variant, whose x-step
/// sees `∇h(x^k)`, and 0 for the proximal one.
pub fn variant_constants(l: f64, mu1: f64, r: f64, t1: f64, variant: Variant) -> VariantConstants {
    let lm = l + mu1;
    match variant {
        Variant::PAdmm => VariantConstants {
            c0: 4.0 * t1 * mu1 * mu1 / r,
            c1: l + 4.0 * t1 * lm * lm / r,
            c2: 0.0,
            c_m: (6.0 * mu1 * mu1 + 4.0 * lm * lm) * t1,
            c_m_prime: (10.0 * mu1 * mu1 + 8.0 * lm * lm) * t1,
        },
        Variant::PlAdmm => VariantConstants {
            c0: 4.0 * t1 * lm * lm / r,
            c1: l + 4.0 * t1 * mu1 * mu1 / r,
            c2: 1.0,
            c_m: (4.0 * mu1 * mu1 + 6.0 * lm * lm) * t1,
            c_m_prime: (8.0 * mu1 * mu1 + 10.0 * lm * lm) * t1,
        },
    }
}

/// Problem and parameter data every constant depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BundleInputs {
    pub variant: Variant,
    pub l: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub r: f64,
    pub rho: f64,
    pub lam_min_aat: f64,
    pub lam_min_ata: f64,
    pub norm_a: f64,
    /// Łojasiewicz constant, when known or estimated.
    pub c_l: Option<f64>,
}

impl BundleInputs {
    pub fn new(variant: Variant, l: f64, a: &LinearMap, mu1: f64, mu2: f64, r: f64, rho: f64) -> Self {
        BundleInputs {
            variant,
            l,
            mu1,
            mu2,
            r,
            rho,
            lam_min_aat: a.lambda_min_aat(),
            lam_min_ata: a.lambda_min_ata(),
            norm_a: a.op_norm(),
            c_l: None,
        }
    }
}

/// Every named constant of the convergence analysis, evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsBundle {
    pub inputs: BundleInputs,
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_m: f64,
    pub c_m_prime: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    pub c10: f64,
    /// `C7 + 8·T0·‖A‖²`: the y-block constant when the merit carries `2T0`.
    pub c10_tight: f64,
    pub c11: f64,
    pub c12: f64,
    pub c13: f64,
    pub c14: f64,
    pub c15: f64,
    pub c16: f64,
    pub c17: f64,
    /// Needs `C17 > 0` and `C_L`.
    pub c19: Option<f64>,
    /// Needs `C17 > 0`.
    pub c20: Option<f64>,
    pub c21: Option<f64>,
    pub c22: Option<f64>,
    /// Needs `C0 > 0` and `C_L`.
    pub c23: Option<f64>,
}

impl ConstantsBundle {
    pub fn compute(inp: &BundleInputs) -> Result<Self> {
        let (t0, t1) = relaxation_constants(inp.rho, inp.r, inp.lam_min_aat)?;
        let vc = variant_constants(inp.l, inp.mu1, inp.r, t1, inp.variant);
        let (rho, r, na) = (inp.rho, inp.r, inp.norm_a);
        let rr = rho * r;
        let denom = inp.lam_min_aat.sqrt() * (1.0 - (1.0 - rho).abs());
        let big = rho * (inp.l + inp.mu1) / denom;
        let small = rho * inp.mu1 / denom;
        let (c3, c4) = match inp.variant {
            Variant::PAdmm => (big, small),
            Variant::PlAdmm => (small, big),
        };
        let t2 = (1.0 - rho).abs() / denom;
        let c5 = vc.c2 * inp.l + inp.mu1 + r * na;
        let c6 = inp.mu2;
        let c7 = 1.0 + na + 1.0 / rr;
        let c8 = c5 + 2.0 * vc.c0;
        let c9 = c6;
        let c10 = c7 + 4.0 * t0 * na * na;
        let c10_tight = c7 + 8.0 * t0 * na * na;
        let c11 = (c8 + c9 * na + c3 * c10 + c3 * c9 / rr)
            .max(c4 * c10 + c4 * c9 / rr + c3 * c9 / rr)
            .max(c4 * c9 / rr);
        let c12 = (c10 + c9 / rr) * t2;
        let c13 = c9 * t2 / rr;
        let c14 = c8 + c9 * na;
        let c15 = c10_tight + c9 / rr;
        let c16 = c9 / rr;
        let lower = (vc.c0 / 4.0).min(1.0 / rr);
        let c17 = 0.5 * lower;
        let (c20, c21, c22) = if c17 > 0.0 {
            let s = c17.sqrt();
            let c20 = 7.0 / s + 1.0 / c17;
            let c21 = 7.0 / (2.0 * s) + 1.0 / (2.0 * c17);
            (Some(c20), Some(c21), Some(c20 * na + 2.0 * c21 / rr))
        } else {
            (None, None, None)
        };
        let (c19, c23) = match inp.c_l {
            Some(cl) if c17 > 0.0 => (
                Some(lower / (3.0 * cl * cl * c14.max(c15).powi(2))),
                Some(vc.c0 / (12.0 * cl * cl * c11 * c11)),
            ),
            _ => (None, None),
        };
        Ok(ConstantsBundle {
            inputs: *inp,
            t0,
            t1,
            t2,
            c0: vc.c0,
            c1: vc.c1,
            c2: vc.c2,
            c_m: vc.c_m,
            c_m_prime: vc.c_m_prime,
            c3,
            c4,
            c5,
            c6,
            c7,
            c8,
            c9,
            c10,
            c10_tight,
            c11,
            c12,
            c13,
            c14,
            c15,
            c16,
            c17,
            c19,
            c20,
            c21,
            c22,
            c23,
        })
    }

    /// Recomputes the bundle with a Łojasiewicz constant attached.
    pub fn with_c_l(&self, c_l: f64) -> Result<Self> {
        let mut inp = self.inputs;
        inp.c_l = Some(c_l);
        Self::compute(&inp)
    }

    /// `(T_coef, X_coef)` of the merit in the given regime.
    pub fn merit_coefficients(&self, regime: MeritRegime) -> (f64, f64) {
        match regime {
            MeritRegime::Standard => (self.t0, 0.5 * self.c0),
            MeritRegime::Tight => (2.0 * self.t0, self.c0),
        }
    }

    /// Flat `name = value` listing.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "unavailable".to_string(), |x| format!("{x:?}"));
        let i = &self.inputs;
        let mut s = String::new();
        let rows: Vec<(&str, String)> = vec![
            ("variant", i.variant.name().into()),
            ("L", format!("{:?}", i.l)),
            ("mu1", format!("{:?}", i.mu1)),
            ("mu2", format!("{:?}", i.mu2)),
            ("r", format!("{:?}", i.r)),
            ("rho", format!("{:?}", i.rho)),
            ("lambda_min_AAt", format!("{:?}", i.lam_min_aat)),
            ("lambda_min_AtA", format!("{:?}", i.lam_min_ata)),
            ("norm_A", format!("{:?}", i.norm_a)),
            ("C_L", opt(i.c_l)),
            ("T0", format!("{:?}", self.t0)),
            ("T1", format!("{:?}", self.t1)),
            ("T2", format!("{:?}", self.t2)),
            ("C0", format!("{:?}", self.c0)),
            ("C1", format!("{:?}", self.c1)),
            ("C2", format!("{:?}", self.c2)),
            ("C_M", format!("{:?}", self.c_m)),
            ("C_M_prime", format!("{:?}", self.c_m_prime)),
            ("C3", format!("{:?}", self.c3)),
            ("C4", format!("{:?}", self.c4)),
            ("C5", format!("{:?}", self.c5)),
            ("C6", format!("{:?}", self.c6)),
            ("C7", format!("{:?}", self.c7)),
            ("C8", format!("{:?}", self.c8)),
            ("C9", format!("{:?}", self.c9)),
            ("C10", format!("{:?}", self.c10)),
            ("C10_tight", format!("{:?}", self.c10_tight)),
            ("C11", format!("{:?}", self.c11)),
            ("C12", format!("{:?}", self.c12)),
            ("C13", format!("{:?}", self.c13)),
            ("C14", format!("{:?}", self.c14)),
            ("C15", format!("{:?}", self.c15)),
            ("C16", format!("{:?}", self.c16)),
            ("C17", format!("{:?}", self.c17)),
            ("C19", opt(self.c19)),
            ("C20", opt(self.c20)),
            ("C21", opt(self.c21)),
            ("C22", opt(self.c22)),
            ("C23", opt(self.c23)),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    ProxLinear,
    Zero,
}

/// The proximal metrics `M1^k` (n x n) and `M2^k = m2·I` (m x m).
///
/// Schedules are constant in `k`; `m1(k)` and `m2(k)` ignore their argument
/// but keep the indexed interface of the analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSchedule {
    kind: ScheduleKind,
    m1: MetricMatrix,
    m2: MetricMatrix,
    mu1: f64,
    mu2: f64,
    t: Option<f64>,
}

impl MetricSchedule {
    pub fn zero(n: usize, m: usize) -> Self {
        MetricSchedule {
            kind: ScheduleKind::Zero,
            m1: MetricMatrix::zeros(n),
            m2: MetricMatrix::zeros(m),
            mu1: 0.0,
            mu2: 0.0,
            t: None,
        }
    }

    /// Fixed PSD metrics.
    pub fn constant(m1: MetricMatrix, m2: MetricMatrix) -> Result<Self> {
        for (name, m) in [("M1", &m1), ("M2", &m2)] {
            if !m.loewner_check(0.0) {
                return Err(Error::InvalidInput(format!("{name} is not positive semidefinite")));
            }
        }
        let (mu1, mu2) = (m1.norm(), m2.norm());
        Ok(MetricSchedule { kind: ScheduleKind::Constant, m1, m2, mu1, mu2, t: None })
    }

    /// `M1 = (1/t)I − rA*A`, `M2 = 0`, which turns the x-step into an
    /// explicit prox or gradient step. Requires `t·r·‖A‖² ≤ 1`.
    pub fn prox_linear(a: &LinearMap, r: f64, t: f64) -> Result<Self> {
        if !(t > 0.0) || !(r > 0.0) {
            return Err(Error::InvalidInput("prox-linear schedule needs t > 0 and r > 0".into()));
        }
        let na2 = a.op_norm() * a.op_norm();
        if t * r * na2 > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "prox-linear schedule needs t*r*|A|^2 <= 1, got {}",
                t * r * na2
            )));
        }
        let n = a.cols();
        let mut data: Vec<f64> = a.gram_ata().iter().map(|v| -r * v).collect();
        for i in 0..n {
            data[i * n + i] += 1.0 / t;
        }
        let m1 = MetricMatrix::new(n, data)?;
        let mu1 = m1.norm();
        Ok(MetricSchedule {
            kind: ScheduleKind::ProxLinear,
            m1,
            m2: MetricMatrix::zeros(a.rows()),
            mu1,
            mu2: 0.0,
            t: Some(t),
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn m1(&self, _k: usize) -> &MetricMatrix {
        &self.m1
    }

    pub fn m2(&self, _k: usize) -> &MetricMatrix {
        &self.m2
    }

    /// `sup_k ‖M1^k‖`.
    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    /// `sup_k ‖M2^k‖`.
    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn t(&self) -> Option<f64> {
        self.t
    }
}

/// Declarative schedule description, resolved by [`make_schedule`].
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Zero,
    Constant { m1: MetricMatrix, m2: MetricMatrix },
    ProxLinear { t: f64 },
}

pub fn make_schedule(spec: &ScheduleSpec, a: &LinearMap, r: f64) -> Result<MetricSchedule> {
    match spec {
        ScheduleSpec::Zero => Ok(MetricSchedule::zero(a.cols(), a.rows())),
        ScheduleSpec::Constant { m1, m2 } => {
            if m1.dim() != a.cols() || m2.dim() != a.rows() {
                return Err(Error::Dimension("metric sizes must match A".into()));
            }
            MetricSchedule::constant(m1.clone(), m2.clone())
        }
        ScheduleSpec::ProxLinear { t } => MetricSchedule::prox_linear(a, r, *t),
    }
}

/// Positivity test of the metric condition at one index `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCheck {
    pub k: usize,
    /// Smallest eigenvalue of `2M1^k + rA*A`.
    pub min_eig: f64,
    /// Value that `min_eig` must reach.
    pub threshold: f64,
    pub slack: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub regime: MeritRegime,
    pub gamma: f64,
    pub r: f64,
    /// `(2 + γ)·T1·L`.
    pub r_min: f64,
    pub r_ok: bool,
    pub metric_checks: Vec<MetricCheck>,
    pub constants: ConstantsBundle,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.r_ok && self.metric_checks.iter().all(|c| c.ok)
    }

    /// Smallest slack over the sampled indices.
    pub fn min_slack(&self) -> f64 {
        self.metric_checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min)
    }

    /// Names of the conditions that failed.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.r_ok {
            out.push(format!("r_bound (r = {:?} < {:?})", self.r, self.r_min));
        }
        for c in self.metric_checks.iter().filter(|c| !c.ok) {
            out.push(format!("metric_positivity k={} slack={:?}", c.k, c.slack));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "regime = {}", self.regime.name());
        let _ = writeln!(s, "gamma = {:?}", self.gamma);
        s.push_str(&self.constants.to_text());
        let _ = writeln!(s, "check.r_bound = {} (r = {:?}, required {:?})", pass(self.r_ok), self.r, self.r_min);
        for c in &self.metric_checks {
            let _ = writeln!(s, "check.metric_positivity.k{} = {} slack={:?}", c.k, pass(c.ok), c.slack);
        }
        let _ = writeln!(s, "admissible = {}", pass(self.passed()));
        s
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// Parameters shared by the two admissibility checks.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityInputs<'a> {
    pub schedule: &'a MetricSchedule,
    pub a: &'a LinearMap,
    pub r: f64,
    pub rho: f64,
    pub l: f64,
    pub gamma: f64,
    pub variant: Variant,
}

fn check_regime(inp: &AdmissibilityInputs<'_>, ks: &[usize], regime: MeritRegime) -> Result<AdmissibilityReport> {
    if !(inp.gamma > 1.0) {
        return Err(Error::InvalidInput("gamma must exceed 1".into()));
    }
    let bi = BundleInputs::new(inp.variant, inp.l, inp.a, inp.schedule.mu1(), inp.schedule.mu2(), inp.r, inp.rho);
    let constants = ConstantsBundle::compute(&bi)?;
    let r_min = (2.0 + inp.gamma) * constants.t1 * inp.l;
    let n = inp.a.cols();
    let ata = inp.a.gram_ata();
    let ks: Vec<usize> = if ks.is_empty() { vec![0] } else { ks.to_vec() };
    let metric_checks = ks
        .iter()
        .map(|&k| {
            let m1 = inp.schedule.m1(k);
            let sys: Vec<f64> = m1.data().iter().zip(&ata).map(|(m, g)| 2.0 * m + inp.r * g).collect();
            let min_eig = min_eigenvalue(&sys, n);
            let scale = sys.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
            let threshold = match regime {
                MeritRegime::Standard => constants.c1 + 1.5 * constants.c0,
                MeritRegime::Tight => 2.0 * constants.c1 - inp.l + 2.5 * constants.c0,
            };
            let slack = min_eig - threshold;
            MetricCheck { k, min_eig, threshold, slack, ok: slack >= -PSD_TOL * scale }
        })
        .collect();
    Ok(AdmissibilityReport {
        regime,
        gamma: inp.gamma,
        r: inp.r,
        r_min,
        r_ok: inp.r >= r_min,
        metric_checks,
        constants,
    })
}

/// Certifies `r ≥ (2+γ)T1·L` and `2M1^k + rA*A − C1·I ⪰ (3/2)C0·I` at the
/// sampled indices.
pub fn check_assumption(inp: &AdmissibilityInputs<'_>, ks: &[usize]) -> Result<AdmissibilityReport> {
    check_regime(inp, ks, MeritRegime::Standard)
}

/// Certifies `r ≥ (2+γ)T1·L` and `2M1^k + rA*A + (L − 2C1)·I ⪰ (5/2)C0·I`,
/// which backs the tight merit.
pub fn check_strengthened_assumption(inp: &AdmissibilityInputs<'_>, ks: &[usize]) -> Result<AdmissibilityReport> {
    check_regime(inp, ks, MeritRegime::Tight)
}

/// Dispatches on the regime.
pub fn check_admissibility(
    inp: &AdmissibilityInputs<'_>,
    ks: &[usize],
    regime: MeritRegime,
) -> Result<AdmissibilityReport> {
    check_regime(inp, ks, regime)
}

/// The three closed-form choices of penalty parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "choice", rename_all = "snake_case")]
pub enum RChoice {
    /// `M1 = μ1·I` with `μ1 > L/2`.
    ConstantMetric { mu1: f64 },
    /// Prox-linear metric with a fixed step `t < 1/L`.
    ProxLinear { t: f64 },
    /// `M1 = 0` with injective `A`.
    InjectiveZero { lam_min_ata: f64 },
}

/// Smallest `r` allowed by the closed-form bound for `choice`. Pass `C_M` to
/// certify the standard merit and `C_M′` for the tight one.
pub fn suggest_r(choice: RChoice, l: f64, t1: f64, c_m: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidInput("gamma must exceed 1".into()));
    }
    let base = (2.0 + gamma) * t1 * l;
    let other = match choice {
        RChoice::ConstantMetric { mu1 } => {
            if !(mu1 > l / 2.0) {
                return Err(Error::InvalidInput(format!("constant metric needs mu1 > L/2, got mu1 = {mu1}")));
            }
            c_m / (2.0 * mu1 - l)
        }
        RChoice::ProxLinear { t } => {
            if !(t > 0.0) || t * l >= 1.0 {
                return Err(Error::InvalidInput("prox-linear choice needs 0 < t < 1/L".into()));
            }
            t * c_m / (1.0 - t * l)
        }
        RChoice::InjectiveZero { lam_min_ata } => {
            if !(lam_min_ata > 0.0) {
                return Err(Error::InvalidInput("zero metric needs injective A".into()));
            }
            (l + (l * l + 4.0 * lam_min_ata * c_m).sqrt()) / (2.0 * lam_min_ata)
        }
    };
    Ok(base.max(other))
}
