//! Convergence-rate analysis under the Łojasiewicz property.
//!
//! The error `e_k = F_k − F_*` of a converging merit sequence satisfies the
//! lagged recurrence `e_{k−l0} − e_k ≥ C_e·e_k^{2θ}` near the limit. From it
//! follow a geometric envelope for `θ ≤ ½` and a power envelope for
//! `θ > ½`. This module estimates `θ`, verifies the recurrence on a trace
//! and checks both envelopes, for the merit and for the iterates.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diagnostics::Violation;
use crate::error::{Error, Result};
use crate::linops::{norm, sub};
use crate::params::{ConstantsBundle, MeritRegime};
use crate::trace::Trace;

/// Lag of the merit recurrence: it links `E_{k−1}` and `E_{k+1}`.
pub const MERIT_LAG: usize = 2;
/// Bounds of the reported exponent.
pub const THETA_MIN: f64 = 0.05;
pub const THETA_MAX: f64 = 0.95;
/// Fewest points accepted by [`fit_loj_exponent`].
pub const MIN_FIT_POINTS: usize = 10;
/// Fitted exponents up to `½ + LINEAR_BAND` count as linear: a geometric
/// sequence fits to ½ only up to rounding.
pub const LINEAR_BAND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FStarMode {
    /// `F_*` is the last merit value of the trace.
    LastValue,
    Known(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSource {
    Merit,
    IterateDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSequence {
    pub values: Vec<f64>,
    pub f_star: f64,
    pub source: ErrorSource,
    pub warning: Option<String>,
}

/// `e_k = F_k − F_*` for an arbitrary merit sequence. Negative values within
/// `1e-14·scale` of zero are clipped to zero.
pub fn error_sequence_from_values(f: &[f64], mode: FStarMode) -> Result<ErrorSequence> {
    if f.is_empty() {
        return Err(Error::InvalidInput("empty merit sequence".into()));
    }
    let f_star = match mode {
        FStarMode::LastValue => f[f.len() - 1],
        FStarMode::Known(v) => v,
    };
    let scale = f.iter().filter(|v| v.is_finite()).fold(f_star.abs(), |a, v| a.max(v.abs())).max(1.0);
    let mut warning = None;
    if mode == FStarMode::LastValue && f.len() >= 2 {
        let jump = (f[f.len() - 1] - f[f.len() - 2]).abs();
        if jump > 1e-12 * scale {
            warning = Some(format!("merit tail has not stabilized (last change {jump:e})"));
        }
    }
    let values = f
        .iter()
        .map(|v| {
            let e = v - f_star;
            if e < 0.0 && e >= -1e-14 * scale {
                0.0
            } else {
                e
            }
        })
        .collect::<Vec<_>>();
    if warning.is_none() && values.iter().any(|e| *e < 0.0) {
        warning = Some("merit falls below F_*".into());
    }
    Ok(ErrorSequence { values, f_star, source: ErrorSource::Merit, warning })
}

/// Merit error of a trace.
pub fn error_sequence(trace: &Trace, mode: FStarMode) -> Result<ErrorSequence> {
    error_sequence_from_values(&trace.merit_values(), mode)
}

/// Result of [`verify_recurrence`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCheck {
    /// Largest `C_e` for which the recurrence holds on the whole window.
    pub c_e_max: f64,
    pub ok: bool,
    /// Half-open index range actually used.
    pub window: (usize, usize),
}

/// `C_e_max = min_k (e_{k−l0} − e_k)/e_k^{2θ}` over `k ≥ max(tail_start, l0)`.
/// The window is cut before the first nonpositive value.
pub fn verify_recurrence(e: &[f64], theta: f64, l0: usize, tail_start: usize) -> Result<RecurrenceCheck> {
    if l0 == 0 {
        return Err(Error::InvalidInput("lag l0 must be at least 1".into()));
    }
    let start = tail_start.max(l0);
    let end = (start..e.len()).find(|&k| !(e[k] > 0.0)).unwrap_or(e.len());
    if end <= start {
        return Err(Error::InvalidInput("no positive values in the recurrence window".into()));
    }
    let c_e_max = (start..end)
        .map(|k| (e[k - l0] - e[k]) / e[k].powf(2.0 * theta))
        .fold(f64::INFINITY, f64::min);
    Ok(RecurrenceCheck { c_e_max, ok: c_e_max > 0.0, window: (start, end) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateRegime {
    /// `θ ≤ ½` up to [`LINEAR_BAND`]: geometric decay.
    Linear,
    /// `θ > ½`: power-law decay.
    Sublinear,
    /// The fit hit a clamp.
    Unclassifiable,
}

impl RateRegime {
    pub fn name(self) -> &'static str {
        match self {
            RateRegime::Linear => "linear",
            RateRegime::Sublinear => "sublinear",
            RateRegime::Unclassifiable => "unclassifiable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted exponent, clamped to `[THETA_MIN, THETA_MAX]`.
    pub theta_hat: f64,
    pub theta_raw: f64,
    pub c_e_hat: f64,
    pub l0: usize,
    pub window: (usize, usize),
    /// RMS of the log-space fit errors.
    pub residual: f64,
    pub points: usize,
    pub regime: RateRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExponentEstimate {
    /// The sequence reaches exactly zero, so it converged in finitely many
    /// steps and no exponent is fitted.
    FiniteTime { first_zero: usize },
    Fitted(RateFit),
}

impl ExponentEstimate {
    pub fn fit(&self) -> Option<&RateFit> {
        match self {
            ExponentEstimate::Fitted(f) => Some(f),
            ExponentEstimate::FiniteTime { .. } => None,
        }
    }

    pub fn is_finite_time(&self) -> bool {
        matches!(self, ExponentEstimate::FiniteTime { .. })
    }
}

/// The default analysis range: the maximal positive, strictly decreasing
/// stretch ending at the first nonpositive value.
pub fn decreasing_stretch(e: &[f64]) -> (usize, usize) {
    let end = e.iter().position(|v| !(*v > 0.0)).unwrap_or(e.len());
    let mut start = 0;
    for k in 1..end {
        if !(e[k] < e[k - 1]) {
            start = k;
        }
    }
    (start, end)
}

/// Least-squares fit of `log(e_{k−l0} − e_k) = log C_e + 2θ·log e_k`.
///
/// Without an explicit `window` the fit uses the last half of
/// [`decreasing_stretch`]. A sequence reaching exact zero is classified as
/// finite-time.
pub fn fit_loj_exponent(e: &[f64], l0: usize, window: Option<(usize, usize)>) -> Result<ExponentEstimate> {
    if l0 == 0 {
        return Err(Error::InvalidInput("lag l0 must be at least 1".into()));
    }
    if let Some(z) = e.iter().position(|v| *v == 0.0) {
        return Ok(ExponentEstimate::FiniteTime { first_zero: z });
    }
    let (lo, hi) = match window {
        Some((lo, hi)) => (lo, hi.min(e.len())),
        None => {
            let (s, t) = decreasing_stretch(e);
            (s + (t - s) / 2, t)
        }
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in lo.max(l0)..hi {
        let diff = e[k - l0] - e[k];
        if e[k] > 0.0 && diff > 0.0 {
            xs.push(e[k].ln());
            ys.push(diff.ln());
        }
    }
    let n = xs.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::InvalidInput(format!(
            "exponent fit needs at least {MIN_FIT_POINTS} decreasing positive points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Numerical("exponent fit: constant abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual =
        (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / nf).sqrt();
    let theta_raw = slope / 2.0;
    let theta_hat = theta_raw.clamp(THETA_MIN, THETA_MAX);
    let regime = if theta_raw <= THETA_MIN || theta_raw >= THETA_MAX || !theta_raw.is_finite() {
        RateRegime::Unclassifiable
    } else if theta_hat <= 0.5 + LINEAR_BAND {
        RateRegime::Linear
    } else {
        RateRegime::Sublinear
    };
    Ok(ExponentEstimate::Fitted(RateFit {
        theta_hat,
        theta_raw,
        c_e_hat: intercept.exp(),
        l0,
        window: (lo, hi),
        residual,
        points: n,
        regime,
    }))
}

/// Envelope constants derived from `(θ, C_e, e_0, l0, k0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    /// `e_k ≤ c·q^k`.
    Geometric { q: f64, c: f64 },
    /// `e_k ≤ c·(k − l0 + 1)^{−p}`.
    Power { c: f64, p: f64 },
}

impl Envelope {
    pub fn new(theta: f64, c_e: f64, e0: f64, l0: usize, k0: usize) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidInput(format!("theta must lie in (0, 1), got {theta}")));
        }
        if !(c_e > 0.0) || !(e0 > 0.0) || l0 == 0 {
            return Err(Error::InvalidInput("envelope needs C_e > 0, e_0 > 0 and l0 >= 1".into()));
        }
        let l0f = l0 as f64;
        let s = 2.0 * theta - 1.0;
        if theta <= 0.5 {
            let base = c_e * e0.powf(s) + 1.0;
            let q = (1.0 / base).powf(1.0 / l0f);
            let c = e0 * base.powf(k0 as f64 / l0f + 1.0);
            Ok(Envelope::Geometric { q, c })
        } else {
            let nu = 2f64.powf(-1.0 / (2.0 * theta));
            let c1 = s * c_e / 2.0;
            let c2 = (nu.powf(-s) - 1.0) * e0.powf(s);
            let cp = c1.min(c2);
            let p = 1.0 / s;
            Ok(Envelope::Power { c: (cp / l0f).powf(-p), p })
        }
    }

    pub fn bound(&self, k: usize, l0: usize) -> f64 {
        match *self {
            Envelope::Geometric { q, c } => c * q.powf(k as f64),
            Envelope::Power { c, p } => c * ((k as f64) - (l0 as f64) + 1.0).powf(-p),
        }
    }
}

/// Checks `e_k` against the envelope for `k ≥ k0 + l0`. `e` must be indexed
/// so that the recurrence with `C_e` holds from `k0` on.
pub fn rate_envelope_check(e: &[f64], theta: f64, c_e: f64, l0: usize, k0: usize) -> Result<Vec<Violation>> {
    let e0 = *e.first().ok_or_else(|| Error::InvalidInput("empty error sequence".into()))?;
    let env = Envelope::new(theta, c_e, e0, l0, k0)?;
    let mut out = Vec::new();
    for (k, &v) in e.iter().enumerate().skip(k0 + l0) {
        let b = env.bound(k, l0);
        if v > b + 1e-9 * b.abs().max(v.abs()) {
            out.push(Violation { check: "rate_envelope".into(), k, lhs: v, rhs: b });
        }
    }
    Ok(out)
}

/// `C_L ≥ E_k^θ/‖D^k‖`, maximized over `k` in `range`.
pub fn c_l_surrogate(trace: &Trace, e: &[f64], theta: f64, range: (usize, usize)) -> Option<f64> {
    let mut best: Option<f64> = None;
    for k in range.0..range.1.min(e.len()).min(trace.records.len()) {
        let d = trace.records[k].big_d_norm;
        if d > 0.0 && e[k] > 0.0 {
            let v = e[k].powf(theta) / d;
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

/// The limit point used by [`iterate_rate_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPoint {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl LimitPoint {
    pub fn last_of(trace: &Trace) -> Self {
        let r = trace.last();
        LimitPoint { x: r.x.clone(), z: r.z.clone(), y: r.y.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRateReport {
    pub theta: f64,
    pub c_l: f64,
    pub c20: f64,
    pub c21: f64,
    pub c22: f64,
    pub violations: Vec<Violation>,
    /// Log-linear fit of `‖x^k − x̂‖` over the range; below one means
    /// geometric decay.
    pub x_ratio: Option<f64>,
    /// Exponent the power fit of `‖x^k − x̂‖` should show when `θ > ½`.
    pub predicted_power: Option<f64>,
}

/// Distance envelopes for `k` in `range`, with `φ(s) = C_L s^{1−θ}/(1−θ)`:
///
/// ```text
/// ‖x^k − x̂‖ ≤ C20·max{√E_k, φ(E_k)}
/// ‖y^k − ŷ‖ ≤ C21·max{√E_k, φ(E_k)}
/// ‖z^k − ẑ‖ ≤ C22·max{√E_{k−1}, φ(E_{k−1})}
/// ```
pub fn iterate_rate_check(
    trace: &Trace,
    e: &[f64],
    range: (usize, usize),
    limit: &LimitPoint,
    theta: f64,
    constants: &ConstantsBundle,
    c_l: f64,
) -> Result<IterateRateReport> {
    let (c20, c21, c22) = match (constants.c20, constants.c21, constants.c22) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::Unavailable("iterate rates need C17 > 0".into())),
    };
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(format!("theta must lie in (0, 1), got {theta}")));
    }
    let phi = |s: f64| c_l * s.max(0.0).powf(1.0 - theta) / (1.0 - theta);
    let env = |s: f64| s.max(0.0).sqrt().max(phi(s));
    let hi = range.1.min(e.len()).min(trace.records.len());
    let lo = range.0.max(1);
    let mut violations = Vec::new();
    let mut pts = Vec::new();
    let mut check = |name: &str, k: usize, lhs: f64, rhs: f64| {
        if lhs > rhs + 1e-9 * (1.0 + rhs.abs()) {
            violations.push(Violation { check: name.into(), k, lhs, rhs });
        }
    };
    for k in lo..hi {
        let r = &trace.records[k];
        let dxk = norm(&sub(&r.x, &limit.x));
        check("rate_x", k, dxk, c20 * env(e[k]));
        check("rate_y", k, norm(&sub(&r.y, &limit.y)), c21 * env(e[k]));
        check("rate_z", k, norm(&sub(&r.z, &limit.z)), c22 * env(e[k - 1]));
        if dxk > 0.0 {
            pts.push((k as f64, dxk.ln()));
        }
    }
    let x_ratio = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mk = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let skk: f64 = pts.iter().map(|p| (p.0 - mk).powi(2)).sum();
        let skl: f64 = pts.iter().map(|p| (p.0 - mk) * (p.1 - ml)).sum();
        Some((skl / skk).exp())
    } else {
        None
    };
    let predicted_power = (theta > 0.5).then(|| (1.0 - theta) / (2.0 * theta - 1.0));
    Ok(IterateRateReport { theta, c_l, c20, c21, c22, violations, x_ratio, predicted_power })
}

/// Full merit-rate analysis of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub f_star: f64,
    pub l0: usize,
    /// Records analyzed, `[0, window_end)`.
    pub window_end: usize,
    /// Tail the recurrence and envelopes are applied to.
    pub tail: (usize, usize),
    pub estimate: ExponentEstimate,
    pub c_e_max: Option<f64>,
    pub recurrence_ok: bool,
    pub envelope_violations: Vec<Violation>,
    pub c_l: Option<f64>,
    pub iterates: Option<IterateRateReport>,
    pub warnings: Vec<String>,
}

impl RateReport {
    pub fn envelope_ok(&self) -> bool {
        self.recurrence_ok
            && self.envelope_violations.is_empty()
            && self.iterates.as_ref().is_none_or(|r| r.violations.is_empty())
    }

    /// Flat `key = value` text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let fit = self.estimate.fit();
        let opt = |v: Option<f64>| v.map_or_else(|| "unavailable".to_string(), |x| format!("{x:?}"));
        let _ = writeln!(s, "f_star = {:?}", self.f_star);
        let _ = writeln!(s, "l0 = {}", self.l0);
        let _ = writeln!(s, "window_end = {}", self.window_end);
        let _ = writeln!(s, "tail = {}..{}", self.tail.0, self.tail.1);
        let _ = writeln!(s, "finite_time = {}", self.estimate.is_finite_time());
        let _ = writeln!(s, "theta_hat = {}", opt(fit.map(|f| f.theta_hat)));
        let _ = writeln!(s, "theta_raw = {}", opt(fit.map(|f| f.theta_raw)));
        let _ = writeln!(s, "C_e_hat = {}", opt(fit.map(|f| f.c_e_hat)));
        let _ = writeln!(s, "fit_residual = {}", opt(fit.map(|f| f.residual)));
        let _ = writeln!(s, "regime = {}", fit.map_or("finite_time", |f| f.regime.name()));
        let _ = writeln!(s, "C_e_max = {}", opt(self.c_e_max));
        let _ = writeln!(s, "recurrence_ok = {}", self.recurrence_ok);
        let _ = writeln!(s, "envelope_violations = {}", self.envelope_violations.len());
        let _ = writeln!(s, "C_L = {}", opt(self.c_l));
        if let Some(it) = &self.iterates {
            let _ = writeln!(s, "iterate_violations = {}", it.violations.len());
            let _ = writeln!(s, "x_ratio = {}", opt(it.x_ratio));
        }
        let _ = writeln!(s, "envelope_ok = {}", self.envelope_ok());
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        s
    }
}

/// Analyzes the first tenth of a trace against `F_* = F_K`.
///
/// The exponent is fitted on the positive, strictly decreasing part of that
/// window. The recurrence and envelopes use that stretch re-indexed to start
/// at zero, with `k0 = l0`. Iterate envelopes are checked when `C17 > 0`,
/// with the last iterate as the limit point.
pub fn analyze_merit_rates(trace: &Trace, l0: usize) -> Result<RateReport> {
    if trace.header.regime != MeritRegime::Tight {
        return Err(Error::InvalidInput(format!(
            "rate analysis needs a trace audited in the tight regime, got {}",
            trace.header.regime.name()
        )));
    }
    let es = error_sequence(trace, FStarMode::LastValue)?;
    let window_end = (trace.records.len() / 10).max(1);
    let e = &es.values[..window_end];
    let mut warnings: Vec<String> = es.warning.iter().cloned().collect();
    let estimate = fit_loj_exponent(e, l0, None)?;
    let mut report = RateReport {
        f_star: es.f_star,
        l0,
        window_end,
        tail: (0, 0),
        estimate: estimate.clone(),
        c_e_max: None,
        recurrence_ok: false,
        envelope_violations: Vec::new(),
        c_l: None,
        iterates: None,
        warnings: Vec::new(),
    };
    let fit = match estimate {
        ExponentEstimate::FiniteTime { .. } => {
            report.recurrence_ok = true;
            report.warnings = warnings;
            return Ok(report);
        }
        ExponentEstimate::Fitted(f) => f,
    };
    if fit.regime == RateRegime::Unclassifiable {
        warnings.push("fitted exponent hit a clamp".into());
    }
    let theta = fit.theta_hat;
    let (s, t) = decreasing_stretch(e);
    report.tail = (s, t);
    let tail = &e[s..t];
    let rec = verify_recurrence(tail, theta, l0, l0)?;
    report.c_e_max = Some(rec.c_e_max);
    report.recurrence_ok = rec.ok;
    if rec.ok {
        report.envelope_violations = rate_envelope_check(tail, theta, rec.c_e_max, l0, l0)?;
    }
    let c_l = c_l_surrogate(trace, &es.values, theta, (s + l0, t));
    report.c_l = c_l;
    if let Some(c_l) = c_l {
        let constants = trace.header.constants.with_c_l(c_l)?;
        match iterate_rate_check(trace, &es.values, (s + l0, t), &LimitPoint::last_of(trace), theta, &constants, c_l) {
            Ok(r) => report.iterates = Some(r),
            Err(Error::Unavailable(msg)) => warnings.push(msg),
            Err(e) => return Err(e),
        }
    }
    report.warnings = warnings;
    Ok(report)
}
