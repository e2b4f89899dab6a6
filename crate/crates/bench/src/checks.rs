//! Evaluation of the ten acceptance criteria.

use std::time::{Duration, Instant};

use ncadmm::diagnostics::summability_bound;
use ncadmm::functions::{descent_lemma_check, grad_check, semiconvexity_check, CosineSum, Quadratic};
use ncadmm::rates::{fit_loj_exponent, ExponentEstimate};
use ncadmm::rng::Lcg;
use ncadmm::solver::run;
use ncadmm::{Result, SmoothFunction, Stopping, Trace, Variant, XSolver};

use crate::{certified_config, rate_run, run_cell, run_matrix, CellOutcome, CriterionResult, Instance, ScheduleChoice, SuiteOptions, SuiteReport, MIN_INSTANCES, REGIMES};

/// Budget of the matrix runs.
pub const MATRIX_BUDGET: Duration = Duration::from_secs(30);
/// Budget of the whole suite.
pub const SUITE_BUDGET: Duration = Duration::from_secs(120);
pub const MIN_ITERATIONS: usize = 500;
pub const KKT_GAP: f64 = 1e-6;
pub const DIFF_GAP: f64 = 1e-6;
pub const SPECIALIZATION_TOL: f64 = 1e-12;
pub const SPECIALIZATION_ITERS: usize = 100;
pub const RATE_ITERS: usize = 4000;
pub const RANDOM_SAMPLES: usize = 100;

fn crit(id: usize, name: &'static str, passed: bool, measured: String) -> CriterionResult {
    CriterionResult { id, name, passed, measured }
}

fn count<F: Fn(&CellOutcome) -> usize>(cells: &[CellOutcome], f: F) -> usize {
    cells.iter().map(f).sum()
}

fn max_of<F: Fn(&CellOutcome) -> f64>(cells: &[CellOutcome], f: F) -> f64 {
    // NaN counts as the worst value, not as a skipped one.
    cells.iter().map(|c| { let v = f(c); if v.is_nan() { f64::INFINITY } else { v } }).fold(0.0, f64::max)
}

/// Largest per-iterate deviation between two traces, relative to `1 + |v|`.
pub fn max_trace_deviation(a: &Trace, b: &Trace) -> f64 {
    if a.records.len() != b.records.len() {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for (ra, rb) in a.records.iter().zip(&b.records) {
        for (u, v) in [(&ra.x, &rb.x), (&ra.z, &rb.z), (&ra.y, &rb.y)] {
            for (p, q) in u.iter().zip(v.iter()) {
                worst = worst.max((p - q).abs() / (1.0 + p.abs().max(q.abs())));
            }
        }
    }
    worst
}

/// Runs the prox-linear instances twice, once through the explicit x-step
/// and once through the generic solve, and returns the largest deviation.
pub fn specialization_gap(instances: &[Instance]) -> Result<(f64, usize)> {
    let mut worst = 0.0_f64;
    let mut pairs = 0;
    for inst in instances.iter().filter(|i| matches!(i.schedule, ScheduleChoice::ProxLinear { .. })) {
        for variant in [Variant::PAdmm, Variant::PlAdmm] {
            let mut explicit = certified_config(inst, variant, 1.0, REGIMES[0])?;
            explicit.stopping = Stopping { max_iter: SPECIALIZATION_ITERS, diff_tol: 0.0, kkt_tol: 0.0 };
            let mut generic = explicit.clone();
            generic.x_solver = match variant {
                Variant::PAdmm => XSolver::QuadraticClosedForm,
                Variant::PlAdmm => XSolver::LinearSystemDense,
            };
            let spec = &inst.problem.spec;
            let a = run(spec, &explicit).map_err(|f| f.error)?;
            let b = run(spec, &generic).map_err(|f| f.error)?;
            worst = worst.max(max_trace_deviation(&a, &b));
            pairs += 1;
        }
    }
    Ok((worst, pairs))
}

/// `e_k = 2^{−k}`, `e_k = k^{−2}` and a sequence that reaches zero.
pub fn synthetic_exponents() -> Result<(f64, f64, bool)> {
    let geo: Vec<f64> = (0..60).map(|k| 0.5f64.powi(k)).collect();
    let pow: Vec<f64> = (0..=1000).map(|k| if k == 0 { 2.0 } else { (k as f64).powi(-2) }).collect();
    let zero: Vec<f64> = (0..40).map(|k| if k < 20 { 0.5f64.powi(k) } else { 0.0 }).collect();
    let theta = |e: &ExponentEstimate| e.fit().map_or(f64::NAN, |f| f.theta_hat);
    let g = fit_loj_exponent(&geo, 1, None)?;
    let p = fit_loj_exponent(&pow, 1, Some((100, 1001)))?;
    let z = fit_loj_exponent(&zero, 1, None)?;
    Ok((theta(&g), theta(&p), z.is_finite_time()))
}

/// The geometric equality case, then random sequences built to satisfy the
/// three-term recurrence. Returns the equality-case error and the number of
/// random instances where the bound failed.
pub fn summability_checks(seed: u64) -> Result<(f64, usize)> {
    let a: Vec<Vec<f64>> = (0..=80).map(|k| vec![0.5f64.powi(k)]).collect();
    let eq = summability_bound(&a, &[0.5], &[0.0], &[0.0], 0.0, 2, 80, 0)?;
    let eq_err = (eq.bound - 0.5).abs() + (eq.actual - 0.5).abs();
    let mut rng = Lcg::new(seed ^ 0x5u64);
    let mut failures = 0;
    for _ in 0..RANDOM_SAMPLES {
        let n = 1 + (rng.next_u64() % 3) as usize;
        let mut c0 = Vec::new();
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        for _ in 0..n {
            let total = rng.uniform(0.05, 0.95);
            let w = [rng.next_f64() + 1e-3, rng.next_f64() + 1e-3, rng.next_f64() + 1e-3];
            let s: f64 = w.iter().sum();
            c0.push(total * w[0] / s);
            c1.push(total * w[1] / s);
            c2.push(total * w[2] / s);
        }
        let len = 60;
        let delta0 = rng.uniform(0.0, 0.5);
        let delta = |k: usize| delta0 * 0.5f64.powi(k as i32);
        let delta_bar: f64 = (2..len).map(delta).sum();
        let mut seq: Vec<Vec<f64>> = (0..3).map(|_| rng.uniform_vec(n, 0.0, 1.0)).collect();
        for k in 2..len - 1 {
            let dotc = |c: &[f64], v: &[f64]| c.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
            let cap = dotc(&c0, &seq[k]) + dotc(&c1, &seq[k - 1]) + dotc(&c2, &seq[k - 2]) + delta(k);
            let w = rng.uniform_vec(n, 0.0, 1.0);
            let ws: f64 = w.iter().sum::<f64>().max(1e-12);
            let frac = rng.uniform(0.0, 1.0);
            seq.push(w.iter().map(|v| v / ws * frac * cap).collect());
        }
        let i = (rng.next_u64() % n as u64) as usize;
        let lo = 2 + (rng.next_u64() % 10) as usize;
        let hi = lo + (rng.next_u64() % (len as u64 - lo as u64 - 1)) as usize;
        let res = summability_bound(&seq, &c0, &c1, &c2, delta_bar, lo, hi.max(lo), i)?;
        if !res.ok {
            failures += 1;
        }
    }
    Ok((eq_err, failures))
}

/// Smooth functions exercised by the toolkit checks.
pub fn smooth_functions(instances: &[Instance]) -> Vec<Box<dyn SmoothFunction>> {
    let mut out: Vec<Box<dyn SmoothFunction>> = vec![
        Box::new(CosineSum { n: 3 }),
        Box::new(Quadratic::half_sq_dist(&[1.0, -2.0])),
    ];
    for inst in instances {
        if let Some(q) = inst.problem.spec.h.as_quadratic() {
            out.push(Box::new(q.clone()));
        }
    }
    out
}

/// `(worst grad_check, all semiconvexity, all descent lemma)`.
pub fn smoothness_checks(instances: &[Instance], seed: u64) -> (f64, bool, bool) {
    let fs = smooth_functions(instances);
    let mut rng = Lcg::new(seed ^ 0x9u64);
    let mut worst = 0.0_f64;
    let mut semi = true;
    let mut desc = true;
    for (i, f) in fs.iter().enumerate() {
        for _ in 0..10 {
            let x = rng.uniform_vec(f.dim(), -2.0, 2.0);
            worst = worst.max(grad_check(f.as_ref(), &x));
        }
        semi &= semiconvexity_check(f.as_ref(), RANDOM_SAMPLES, seed.wrapping_add(i as u64));
        desc &= descent_lemma_check(f.as_ref(), RANDOM_SAMPLES, seed.wrapping_add(100 + i as u64));
    }
    (worst, semi, desc)
}

pub(crate) fn evaluate(instances: &[Instance], opts: &SuiteOptions, start: Instant) -> Result<SuiteReport> {
    if instances.len() < MIN_INSTANCES {
        return Err(ncadmm::Error::InvalidInput(format!(
            "the suite needs at least {MIN_INSTANCES} instances, got {}",
            instances.len()
        )));
    }
    let t_matrix = Instant::now();
    let cells = run_matrix(instances, opts)?;
    let matrix_time = t_matrix.elapsed();
    let mut criteria = Vec::new();

    let min_iters = cells.iter().map(|c| c.iterations).min().unwrap_or(0);
    let descent = count(&cells, |c| c.audit.descent.len());
    criteria.push(crit(
        1,
        "descent",
        descent == 0 && min_iters >= MIN_ITERATIONS && matrix_time < MATRIX_BUDGET,
        format!("{} runs, {descent} violations, min iters {min_iters}, {:.2} s", cells.len(), matrix_time.as_secs_f64()),
    ));

    let bd = count(&cells, |c| c.audit.bound_d.len());
    let bbd = count(&cells, |c| c.audit.bound_big_d.len());
    criteria.push(crit(2, "subgradient bounds", bd + bbd == 0, format!("d: {bd}, D: {bbd} violations")));

    let est = count(&cells, |c| c.audit.estimates.len());
    criteria.push(crit(3, "iterate estimates", est == 0, format!("{est} violations")));

    let stat = max_of(&cells, |c| c.kkt.stationarity);
    let feas = max_of(&cells, |c| c.kkt.feasibility);
    let member = cells.iter().all(|c| c.kkt.membership);
    let qq_gap = max_of(&cells, |c| if c.instance.starts_with("qq") { c.oracle_gap.unwrap_or(f64::INFINITY) } else { 0.0 });
    criteria.push(crit(
        4,
        "KKT limit",
        stat <= KKT_GAP && feas <= KKT_GAP && member && qq_gap <= KKT_GAP,
        format!("stationarity {stat:.2e}, feasibility {feas:.2e}, membership {member}, oracle gap {qq_gap:.2e}"),
    ));

    let (spec_gap, pairs) = specialization_gap(instances)?;
    criteria.push(crit(
        5,
        "specialization equivalence",
        pairs >= 2 && spec_gap <= SPECIALIZATION_TOL,
        format!("{pairs} pairs, max deviation {spec_gap:.2e}"),
    ));

    let diffs = max_of(&cells, |c| c.final_dx.max(c.final_dz).max(c.final_dy));
    let limit = max_of(&cells, |c| c.limit_gap);
    criteria.push(crit(
        6,
        "vanishing differences",
        diffs <= DIFF_GAP && limit <= DIFF_GAP,
        format!("max difference {diffs:.2e}, |F - (h+g)| {limit:.2e}"),
    ));

    let (_, rate) = rate_run(opts.seed, RATE_ITERS)?;
    let theta = rate.estimate.fit().map_or(f64::NAN, |f| f.theta_hat);
    let (geo, pow, fin) = synthetic_exponents()?;
    let iter_viol = rate.iterates.as_ref().map_or(usize::MAX, |r| r.violations.len());
    let rate_ok = (0.4..=0.6).contains(&theta)
        && rate.c_e_max.is_some_and(|c| c > 0.0)
        && rate.envelope_violations.is_empty()
        && iter_viol == 0
        && (geo - 0.5).abs() <= 0.02
        && (pow - 0.75).abs() <= 0.03
        && fin;
    criteria.push(crit(
        7,
        "rate regime",
        rate_ok,
        format!(
            "theta {theta:.4}, C_e {:.3e}, envelope {} / iterates {iter_viol} violations; synthetic {geo:.4}, {pow:.4}, finite-time {fin}",
            rate.c_e_max.unwrap_or(f64::NAN),
            rate.envelope_violations.len()
        ),
    ));

    let (eq_err, sum_fail) = summability_checks(opts.seed)?;
    criteria.push(crit(
        8,
        "summability bound",
        eq_err <= 1e-12 && sum_fail == 0,
        format!("equality case error {eq_err:.1e}, {sum_fail}/{RANDOM_SAMPLES} random failures"),
    ));

    let (gc, semi, desc) = smoothness_checks(instances, opts.seed);
    criteria.push(crit(
        9,
        "smoothness toolkit",
        gc <= 1e-5 && semi && desc,
        format!("grad_check {gc:.2e}, semiconvexity {semi}, descent lemma {desc}"),
    ));

    // Rerun the first cell and the slowest one.
    let slowest = (0..cells.len()).max_by_key(|&i| cells[i].elapsed).unwrap_or(0);
    let mut same = true;
    for i in [0, slowest] {
        let c = &cells[i];
        let inst = instances.iter().find(|x| x.name == c.instance).expect("cell instance exists");
        let again = run_cell(inst, c.variant, c.rho, c.regime, opts)?;
        same &= again.trace.to_jsonl_string() == c.trace.to_jsonl_string();
    }
    let elapsed = start.elapsed();
    criteria.push(crit(
        10,
        "determinism",
        same && elapsed < SUITE_BUDGET,
        format!("identical bytes {same}, suite {:.2} s", elapsed.as_secs_f64()),
    ));

    Ok(SuiteReport { seed: opts.seed, criteria, cells, elapsed })
}
