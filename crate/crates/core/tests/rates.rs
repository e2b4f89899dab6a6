use ncadmm::linops::MetricMatrix;
use ncadmm::params::{
    relaxation_constants, suggest_r, variant_constants, MeritRegime, MetricSchedule, RChoice, Variant, DEFAULT_GAMMA,
};
use ncadmm::problems::quadratic_quadratic;
use ncadmm::rates::{
    analyze_merit_rates, error_sequence, error_sequence_from_values, fit_loj_exponent, rate_envelope_check,
    verify_recurrence, ExponentEstimate, FStarMode, RateRegime, MERIT_LAG,
};
use ncadmm::solver::{run, SolverConfig, Stopping, XSolver};
use proptest::prelude::*;

fn geometric(q: f64, len: usize) -> Vec<f64> {
    (0..len).map(|k| q.powi(k as i32)).collect()
}

/// `e_k = k^{−2}` for `k ≥ 1`, with `e_0 = 2` so the sequence decreases.
fn inverse_square(len: usize) -> Vec<f64> {
    (0..len).map(|k| if k == 0 { 2.0 } else { (k as f64).powi(-2) }).collect()
}

#[test]
fn error_sequence_examples() {
    let flat = error_sequence_from_values(&[3.0; 5], FStarMode::LastValue).unwrap();
    assert_eq!(flat.values, vec![0.0; 5]);
    let f: Vec<f64> = (0..20).map(|k| 7.0 + 0.5f64.powi(k)).collect();
    let e = error_sequence_from_values(&f, FStarMode::Known(7.0)).unwrap();
    for (k, v) in e.values.iter().enumerate() {
        assert!((v - 0.5f64.powi(k as i32)).abs() <= 1e-15 * 8.0);
    }
    assert!(error_sequence_from_values(&[], FStarMode::LastValue).is_err());
}

#[test]
fn recurrence_examples() {
    let g = verify_recurrence(&geometric(0.5, 60), 0.5, 1, 1).unwrap();
    assert!((g.c_e_max - 1.0).abs() < 1e-12);
    assert!(g.ok);
    let p = verify_recurrence(&inverse_square(1001)[..1000], 0.75, 1, 100).unwrap();
    assert!((p.c_e_max - 2.0).abs() < 0.02, "{}", p.c_e_max);
    let c = verify_recurrence(&[0.3; 20], 0.5, 1, 1).unwrap();
    assert_eq!(c.c_e_max, 0.0);
    assert!(!c.ok);
}

#[test]
fn exponent_fit_examples() {
    let g = fit_loj_exponent(&geometric(0.5, 60), 1, None).unwrap();
    let fit = g.fit().unwrap();
    assert!((fit.theta_hat - 0.5).abs() <= 0.02, "{}", fit.theta_hat);
    let p = fit_loj_exponent(&inverse_square(1001), 1, Some((100, 1001))).unwrap();
    let fit = p.fit().unwrap();
    assert!((fit.theta_hat - 0.75).abs() <= 0.03, "{}", fit.theta_hat);
    assert_eq!(fit.regime, RateRegime::Sublinear);
    let mut z = geometric(0.5, 30);
    z.extend([0.0; 10]);
    assert!(matches!(fit_loj_exponent(&z, 1, None).unwrap(), ExponentEstimate::FiniteTime { first_zero: 30 }));
    assert!(fit_loj_exponent(&geometric(0.5, 8), 1, None).is_err(), "too short to fit");
}

#[test]
fn envelope_examples() {
    let g = geometric(0.5, 60);
    assert!(rate_envelope_check(&g, 0.5, 1.0, 1, 1).unwrap().is_empty());
    let tail: Vec<f64> = inverse_square(1001)[100..].to_vec();
    let rc = verify_recurrence(&tail, 0.75, 1, 1).unwrap();
    assert!(rate_envelope_check(&tail, 0.75, rc.c_e_max, 1, 1).unwrap().is_empty());
    // Inflating C_e shrinks the geometric ratio 1/(1 + C_e) below the true one.
    let inflated = rate_envelope_check(&g, 0.5, 10.0, 1, 1).unwrap();
    assert!(!inflated.is_empty());
}

#[test]
fn quadratic_run_is_linear_with_live_envelopes() {
    let tp = quadratic_quadratic(5, 3, 8).unwrap();
    let l = tp.spec.h.lipschitz();
    let mu1 = 1.5 * l;
    let (_, t1) = relaxation_constants(1.0, 1.0, tp.spec.a.lambda_min_aat()).unwrap();
    let c_m = variant_constants(l, mu1, 1.0, t1, Variant::PlAdmm).c_m_prime;
    let r = suggest_r(RChoice::ConstantMetric { mu1 }, l, t1, c_m, DEFAULT_GAMMA).unwrap();
    let sched = MetricSchedule::constant(MetricMatrix::scaled_identity(5, mu1), MetricMatrix::zeros(3)).unwrap();
    let mut cfg = SolverConfig::new(Variant::PlAdmm, r, 1.0, sched, XSolver::LinearSystemDense);
    cfg.regime = MeritRegime::Tight;
    cfg.stopping = Stopping { max_iter: 4000, diff_tol: 0.0, kkt_tol: 0.0 };
    let trace = run(&tp.spec, &cfg).unwrap();
    assert!(trace.header.certified);

    let e = error_sequence(&trace, FStarMode::LastValue).unwrap();
    let head = &e.values[..400];
    assert!(head.iter().all(|v| *v > 0.0));
    assert!(head.windows(2).skip(2).all(|w| w[1] <= w[0]));

    let rep = analyze_merit_rates(&trace, MERIT_LAG).unwrap();
    let fit = rep.estimate.fit().expect("fitted");
    assert!((0.4..=0.6).contains(&fit.theta_hat), "{}", fit.theta_hat);
    assert!(rep.c_e_max.is_some_and(|c| c > 0.0));
    assert!(rep.envelope_ok(), "{}", rep.to_text());
}

#[test]
fn rate_analysis_rejects_the_standard_regime() {
    let tp = quadratic_quadratic(2, 2, 1).unwrap();
    let sched = MetricSchedule::constant(MetricMatrix::scaled_identity(2, 3.0), MetricMatrix::zeros(2)).unwrap();
    let mut cfg = SolverConfig::new(Variant::PlAdmm, 200.0, 1.0, sched, XSolver::LinearSystemDense);
    cfg.allow_uncertified = true;
    cfg.stopping = Stopping { max_iter: 300, diff_tol: 0.0, kkt_tol: 0.0 };
    let trace = run(&tp.spec, &cfg).unwrap();
    assert!(analyze_merit_rates(&trace, MERIT_LAG).is_err());
}

proptest! {
    #[test]
    fn geometric_sequences_fit_one_half(q in 0.2f64..0.9, c in 0.1f64..10.0) {
        let e: Vec<f64> = geometric(q, 200).iter().map(|v| c * v).take_while(|v| *v > 1e-250).collect();
        let fit = fit_loj_exponent(&e, 1, None).unwrap();
        let fit = fit.fit().unwrap();
        prop_assert!((fit.theta_hat - 0.5).abs() <= 0.02);
        prop_assert_eq!(fit.regime, RateRegime::Linear);
    }

    #[test]
    fn geometric_envelopes_hold(q in 0.2f64..0.9, c in 0.1f64..10.0, l0 in 1usize..4) {
        let e: Vec<f64> = geometric(q, 80).iter().map(|v| c * v).collect();
        let rc = verify_recurrence(&e, 0.5, l0, l0).unwrap();
        prop_assert!(rc.ok);
        prop_assert!(rate_envelope_check(&e, 0.5, rc.c_e_max, l0, l0).unwrap().is_empty());
    }
}
