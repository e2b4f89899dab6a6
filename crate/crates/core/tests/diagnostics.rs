use std::sync::Arc;

use ncadmm::diagnostics::{
    audit_trace, augmented_lagrangian, boundedness_precheck, descent_check, kkt_residual, merit_f, subgradient_d,
    summability_bound, Boundedness, Transition,
};
use ncadmm::functions::{ProxFunction, Quadratic};
use ncadmm::linops::LinearMap;
use ncadmm::params::{MeritRegime, MetricSchedule, Variant};
use ncadmm::problems::quadratic_quadratic;
use ncadmm::rng::Lcg;
use ncadmm::solver::{run, ProblemSpec, Solver, SolverConfig, Stopping, XSolver};
use proptest::prelude::*;

fn scalar(c: f64) -> ProblemSpec {
    ProblemSpec::new(
        Arc::new(Quadratic::half_sq_dist(&[c])),
        ProxFunction::Quadratic { lambda: 1.0, c: vec![0.0] },
        LinearMap::identity(1),
    )
    .unwrap()
}

fn scalar_config(variant: Variant, iters: usize) -> SolverConfig {
    let xs = if variant == Variant::PAdmm { XSolver::QuadraticClosedForm } else { XSolver::LinearSystemDense };
    let mut cfg = SolverConfig::new(variant, 10.0, 1.0, MetricSchedule::zero(1, 1), xs);
    cfg.x0 = Some(vec![1.0]);
    cfg.stopping = Stopping { max_iter: iters, diff_tol: 0.0, kkt_tol: 0.0 };
    cfg
}

#[test]
fn augmented_lagrangian_examples() {
    let p = scalar(0.0);
    assert_eq!(augmented_lagrangian(&[0.0], &[0.0], &[0.0], &p, 10.0), 0.0);
    let (x, z, y) = (100.0 / 121.0, 10.0 / 11.0, -100.0 / 121.0);
    // Term by term: h + g + y(Ax − z) + (r/2)(Ax − z)².
    let expect = 0.5 * x * x + 0.5 * z * z + y * (x - z) + 5.0 * (x - z) * (x - z);
    let lr = augmented_lagrangian(&[x], &[z], &[y], &p, 10.0);
    assert!((lr - expect).abs() < 1e-15);
    assert!((lr - 0.857182).abs() < 1e-6);
    // Feasible point: the penalty terms vanish.
    assert!((augmented_lagrangian(&[0.3], &[0.3], &[5.0], &p, 10.0) - 0.09).abs() < 1e-15);
}

#[test]
fn merit_equals_lagrangian_when_coefficients_vanish() {
    let p = scalar(0.0);
    let cfg = scalar_config(Variant::PAdmm, 1);
    let s = Solver::new(&p, &cfg).unwrap();
    let c = s.constants();
    assert_eq!((c.t0, c.c0), (0.0, 0.0));
    let (x, z, y) = ([0.2], [0.4], [-0.1]);
    let lr = augmented_lagrangian(&x, &z, &y, &p, 10.0);
    assert_eq!(merit_f(&x, &z, &y, &[1.0], &[3.0], &p, c, MeritRegime::Standard), lr);
    // Without movement the merit is the Lagrangian for any constants.
    let cfg2 = scalar_config(Variant::PlAdmm, 1);
    let s2 = Solver::new(&p, &cfg2).unwrap();
    assert_eq!(merit_f(&x, &z, &y, &x, &y, &p, s2.constants(), MeritRegime::Tight), lr);
}

#[test]
fn first_transition_subgradient() {
    let p = scalar(0.0);
    let cfg = scalar_config(Variant::PAdmm, 1);
    let s = Solver::new(&p, &cfg).unwrap();
    let next = s.step(&s.initial_state()).unwrap();
    let d = subgradient_d(&Transition::from_state(&next, &cfg.schedule), &p, s.constants());
    assert!((d.dy[0] + 10.0 / 121.0).abs() < 1e-15);
    let stay = s.initial_state();
    let d0 = subgradient_d(&Transition::from_state(&stay, &cfg.schedule), &p, s.constants());
    assert_eq!(d0.norm, 0.0);
}

#[test]
fn certified_scalar_runs_pass_every_audit() {
    for variant in [Variant::PAdmm, Variant::PlAdmm] {
        for regime in [MeritRegime::Standard, MeritRegime::Tight] {
            let p = scalar(1.0);
            let mut cfg = scalar_config(variant, 500);
            cfg.regime = regime;
            let trace = run(&p, &cfg).unwrap();
            let rep = audit_trace(&trace);
            assert_eq!(rep.total(), 0, "{variant:?} {regime:?}: {:?}", rep.all().next());
        }
    }
}

#[test]
fn certified_quadratic_runs_pass_every_audit() {
    let tp = quadratic_quadratic(5, 3, 11).unwrap();
    let sched = MetricSchedule::constant(
        ncadmm::linops::MetricMatrix::scaled_identity(5, 1.5 * tp.spec.h.lipschitz()),
        ncadmm::linops::MetricMatrix::zeros(3),
    )
    .unwrap();
    for rho in [0.5, 1.0, 1.5] {
        let mut cfg = SolverConfig::new(Variant::PlAdmm, 400.0, rho, sched.clone(), XSolver::LinearSystemDense);
        cfg.stopping = Stopping { max_iter: 500, diff_tol: 0.0, kkt_tol: 0.0 };
        let trace = run(&tp.spec, &cfg).unwrap();
        assert!(trace.header.certified);
        assert_eq!(audit_trace(&trace).total(), 0, "rho = {rho}");
    }
}

#[test]
fn inadmissible_runs_are_reported_not_asserted() {
    let p = scalar(1.0);
    let mut cfg = scalar_config(Variant::PlAdmm, 50);
    cfg.r = 0.6;
    cfg.allow_uncertified = true;
    let trace = run(&p, &cfg).unwrap();
    assert!(!trace.header.certified);
    // The check returns a list either way.
    let _ = descent_check(&trace, &trace.header.constants, MeritRegime::Standard).unwrap();
}

#[test]
fn descent_check_rejects_a_regime_mismatch() {
    let p = scalar(1.0);
    let trace = run(&p, &scalar_config(Variant::PAdmm, 5)).unwrap();
    assert!(descent_check(&trace, &trace.header.constants, MeritRegime::Tight).is_err());
}

#[test]
fn run_started_at_the_kkt_point_does_not_move() {
    let p = scalar(1.0);
    let mut cfg = scalar_config(Variant::PAdmm, 10);
    cfg.x0 = Some(vec![0.5]);
    cfg.z0 = Some(vec![0.5]);
    cfg.y0 = Some(vec![0.5]);
    let trace = run(&p, &cfg).unwrap();
    assert_eq!(audit_trace(&trace).total(), 0);
    for r in &trace.records {
        assert!(r.dx + r.dz + r.dy <= 1e-15);
        assert!(r.d_norm <= 1e-15);
    }
}

#[test]
fn kkt_residual_examples() {
    let p = scalar(1.0);
    let at = kkt_residual(&[0.5], &[0.5], &[0.5], &p, 1e-12);
    assert_eq!((at.stationarity, at.membership, at.feasibility), (0.0, true, 0.0));
    let origin = kkt_residual(&[0.0], &[0.0], &[0.0], &p, 1e-12);
    assert_eq!(origin.stationarity, 1.0);
    assert_eq!(kkt_residual(&[0.7], &[0.7], &[2.0], &p, 1e-12).feasibility, 0.0);
}

#[test]
fn boundedness_examples() {
    let id = LinearMap::identity(2);
    let coercive_h = ProblemSpec::new(
        Arc::new(Quadratic::half_sq_dist(&[1.0, 2.0])),
        ProxFunction::L1 { lambda: 0.3 },
        LinearMap::from_rows(&[vec![1.0, 1.0]]).unwrap(),
    )
    .unwrap();
    assert_eq!(boundedness_precheck(&coercive_h), Boundedness::CoerciveH);
    let sq = ProxFunction::Quadratic { lambda: 1.0, c: vec![0.0, 0.0] };
    let linear_h = ProblemSpec::new(Arc::new(Quadratic::linear(&[1.0, 0.0])), sq.clone(), id.clone()).unwrap();
    assert_eq!(boundedness_precheck(&linear_h), Boundedness::Unknown);
    assert!(Boundedness::Unknown.warning().is_some());
    let zero_h = ProblemSpec::new(Arc::new(Quadratic::constant(2, 0.0)), sq, id).unwrap();
    assert_eq!(boundedness_precheck(&zero_h), Boundedness::InvertibleA);
}

#[test]
fn summability_equality_case() {
    let a: Vec<Vec<f64>> = (0..80).map(|k| vec![0.5f64.powi(k)]).collect();
    let res = summability_bound(&a, &[0.5], &[0.0], &[0.0], 0.0, 2, 79, 0).unwrap();
    assert!((res.bound - 0.5).abs() <= 1e-12);
    assert!((res.actual - 0.5).abs() <= 1e-12);
    assert!(res.ok);
    let zeros = vec![vec![0.0]; 10];
    let z = summability_bound(&zeros, &[0.2], &[0.2], &[0.2], 0.0, 0, 9, 0).unwrap();
    assert!(z.bound >= 0.0 && z.actual == 0.0 && z.ok);
}

#[test]
fn summability_rejects_bad_inputs() {
    let a = vec![vec![1.0]; 10];
    assert!(summability_bound(&a, &[0.5], &[0.3], &[0.3], 0.0, 0, 9, 0).is_err());
    assert!(summability_bound(&vec![vec![-1.0]; 10], &[0.1], &[0.1], &[0.1], 0.0, 0, 9, 0).is_err());
    assert!(summability_bound(&a, &[0.1], &[0.1], &[0.1], 0.0, 0, 10, 0).is_err());
}

/// A sequence satisfying `a^{k+1} + b^{k+1} ≤ c0 a^k + c1 a^{k−1} + c2 a^{k−2} + δ_k`
/// with the given weights, built forward from random starting values.
fn admissible_sequence(rng: &mut Lcg, c: [f64; 3], len: usize, deltas: &[f64]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![rng.uniform(0.0, 1.0)], vec![rng.uniform(0.0, 1.0)], vec![rng.uniform(0.0, 1.0)]];
    while a.len() < len {
        let k = a.len() - 1;
        let cap = c[0] * a[k][0] + c[1] * a[k - 1][0] + c[2] * a[k - 2][0] + deltas[k];
        a.push(vec![cap * rng.uniform(0.0, 1.0)]);
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn summability_bound_holds_on_admissible_sequences(seed in 0u64..100_000, w in (0.0f64..0.33, 0.0f64..0.33, 0.0f64..0.33)) {
        let mut rng = Lcg::new(seed);
        let c = [w.0, w.1, w.2];
        let deltas: Vec<f64> = (0..60).map(|_| rng.uniform(0.0, 0.01)).collect();
        let a = admissible_sequence(&mut rng, c, 60, &deltas);
        let delta_bar: f64 = deltas.iter().sum();
        let res = summability_bound(&a, &[c[0]], &[c[1]], &[c[2]], delta_bar, 0, 59, 0).unwrap();
        prop_assert!(res.ok, "actual {} bound {}", res.actual, res.bound);
    }
}
