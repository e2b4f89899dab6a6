use ncadmm::linops::{LinearMap, MetricMatrix};
use ncadmm::params::{
    check_assumption, check_strengthened_assumption, make_schedule, relaxation_constants, suggest_r, variant_constants,
    AdmissibilityInputs, BundleInputs, ConstantsBundle, MetricSchedule, RChoice, ScheduleSpec, Variant,
};
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + b.abs())
}

#[test]
fn relaxation_constant_examples() {
    assert_eq!(relaxation_constants(1.0, 10.0, 1.0).unwrap(), (0.0, 1.0));
    let (t0, t1) = relaxation_constants(0.5, 10.0, 1.0).unwrap();
    assert!(close(t0, 0.2) && close(t1, 2.0));
    let (t0, t1) = relaxation_constants(1.5, 10.0, 1.0).unwrap();
    assert!(close(t0, 1.0 / 15.0) && close(t1, 6.0));
    assert!(relaxation_constants(0.0, 10.0, 1.0).is_err());
    assert!(relaxation_constants(2.0, 10.0, 1.0).is_err());
    assert!(relaxation_constants(1.0, 10.0, 0.0).is_err());
}

#[test]
fn variant_constant_examples() {
    let p = variant_constants(1.0, 0.0, 10.0, 1.0, Variant::PAdmm);
    assert!(close(p.c0, 0.0) && close(p.c1, 1.4) && close(p.c_m, 4.0) && close(p.c_m_prime, 8.0));
    let q = variant_constants(1.0, 0.0, 10.0, 1.0, Variant::PlAdmm);
    assert!(close(q.c0, 0.4) && close(q.c1, 1.0) && close(q.c_m, 6.0) && close(q.c_m_prime, 10.0));
    assert!(close(variant_constants(1.0, 2.0, 8.0, 1.0, Variant::PAdmm).c0, 2.0));
    // The gradient-difference coefficient belongs to the linearized variant.
    assert_eq!(p.c2, 0.0);
    assert_eq!(q.c2, 1.0);
}

fn scalar_bundle(variant: Variant, rho: f64) -> ConstantsBundle {
    let a = LinearMap::identity(1);
    ConstantsBundle::compute(&BundleInputs::new(variant, 1.0, &a, 0.0, 0.0, 10.0, rho)).unwrap()
}

#[test]
fn bound_constant_examples() {
    let p = scalar_bundle(Variant::PAdmm, 1.0);
    assert_eq!(p.t2, 0.0);
    assert_eq!(p.c4, 0.0);
    assert!(close(p.c5, 10.0));
    assert_eq!(p.c6, 0.0);
    assert!(close(p.c7, 2.1));
    assert_eq!(p.c10, p.c7);
    let q = scalar_bundle(Variant::PlAdmm, 1.0);
    assert!(close(q.c5, 11.0));
}

#[test]
fn composite_identities_hold_exactly() {
    for variant in [Variant::PAdmm, Variant::PlAdmm] {
        for rho in [0.5, 1.0, 1.5] {
            let a = LinearMap::from_rows(&[vec![1.0, 0.2], vec![-0.3, 0.9]]).unwrap();
            let c = ConstantsBundle::compute(&BundleInputs::new(variant, 2.0, &a, 1.5, 0.25, 30.0, rho)).unwrap();
            let na = c.inputs.norm_a;
            let rr = rho * 30.0;
            assert_eq!(c.c8, c.c5 + 2.0 * c.c0);
            assert_eq!(c.c10, c.c7 + 4.0 * c.t0 * na * na);
            assert_eq!(c.c14, c.c8 + c.c9 * na);
            assert_eq!(c.c16, c.c9 / rr);
            assert_eq!(c.c15, c.c10_tight + c.c9 / rr);
            assert!(c.c17 > 0.0);
            assert_eq!(c.c17, 0.5 * (c.c0 / 4.0).min(1.0 / rr));
        }
    }
}

#[test]
fn rate_constants_unavailable_without_c0() {
    let p = scalar_bundle(Variant::PAdmm, 1.0);
    assert_eq!(p.c0, 0.0);
    assert!(p.c20.is_none() && p.c21.is_none() && p.c22.is_none());
    let with_cl = p.with_c_l(1.0).unwrap();
    assert!(with_cl.c19.is_none() && with_cl.c23.is_none());
    let q = scalar_bundle(Variant::PlAdmm, 1.0).with_c_l(2.0).unwrap();
    let c17 = q.c17;
    assert!(close(q.c20.unwrap(), 7.0 / c17.sqrt() + 1.0 / c17));
    assert!(q.c19.is_some() && q.c23.is_some());
}

fn scalar_inputs<'a>(s: &'a MetricSchedule, a: &'a LinearMap, r: f64) -> AdmissibilityInputs<'a> {
    AdmissibilityInputs { schedule: s, a, r, rho: 1.0, l: 1.0, gamma: 1.1, variant: Variant::PAdmm }
}

#[test]
fn assumption_examples() {
    let a = LinearMap::identity(1);
    let s = MetricSchedule::zero(1, 1);
    let ok = check_assumption(&scalar_inputs(&s, &a, 10.0), &[0]).unwrap();
    assert!(ok.passed());
    assert!(close(ok.r_min, 3.1));
    assert!(close(ok.min_slack(), 8.6));
    let bad = check_assumption(&scalar_inputs(&s, &a, 2.0), &[0]).unwrap();
    assert!(!bad.passed() && !bad.r_ok);
    assert!(bad.failures()[0].starts_with("r_bound"));
}

#[test]
fn strengthened_assumption_examples() {
    let a = LinearMap::identity(1);
    let s = MetricSchedule::zero(1, 1);
    let ok = check_strengthened_assumption(&scalar_inputs(&s, &a, 10.0), &[0]).unwrap();
    assert!(ok.passed());
    assert!(close(ok.min_slack(), 8.2));
    let bad = check_strengthened_assumption(&scalar_inputs(&s, &a, 2.5), &[0]).unwrap();
    assert!(!bad.passed());
    assert_eq!(bad.failures().len(), 2, "{:?}", bad.failures());
    // A large metric with a small penalty fails with negative slack.
    let big = MetricSchedule::constant(MetricMatrix::scaled_identity(1, 50.0), MetricMatrix::zeros(1)).unwrap();
    let rep = check_strengthened_assumption(&scalar_inputs(&big, &a, 3.2), &[0]).unwrap();
    assert!(rep.min_slack() < 0.0);
}

#[test]
fn gamma_must_exceed_one() {
    let a = LinearMap::identity(1);
    let s = MetricSchedule::zero(1, 1);
    let mut inp = scalar_inputs(&s, &a, 10.0);
    inp.gamma = 1.0;
    assert!(check_assumption(&inp, &[0]).is_err());
    assert!(suggest_r(RChoice::InjectiveZero { lam_min_ata: 1.0 }, 1.0, 1.0, 4.0, 1.0).is_err());
}

#[test]
fn suggest_r_examples() {
    let r = suggest_r(RChoice::InjectiveZero { lam_min_ata: 1.0 }, 1.0, 1.0, 4.0, 1.1).unwrap();
    assert!(close(r, 3.1));
    let c_m = variant_constants(1.0, 1.0, 1.0, 1.0, Variant::PAdmm).c_m;
    let r = suggest_r(RChoice::ConstantMetric { mu1: 1.0 }, 1.0, 1.0, c_m, 1.1).unwrap();
    assert!(close(r, 3.1f64.max(c_m)));
    let r = suggest_r(RChoice::ProxLinear { t: 0.5 }, 1.0, 1.0, 4.0, 1.1).unwrap();
    assert!(close(r, 4.0));
    assert!(suggest_r(RChoice::ConstantMetric { mu1: 0.5 }, 1.0, 1.0, 4.0, 1.1).is_err());
    assert!(suggest_r(RChoice::InjectiveZero { lam_min_ata: 0.0 }, 1.0, 1.0, 4.0, 1.1).is_err());
}

#[test]
fn suggested_r_certifies_the_scalar_problem() {
    let a = LinearMap::identity(1);
    let s = MetricSchedule::zero(1, 1);
    for variant in [Variant::PAdmm, Variant::PlAdmm] {
        let vc = variant_constants(1.0, 0.0, 1.0, 1.0, variant);
        let r = suggest_r(RChoice::InjectiveZero { lam_min_ata: 1.0 }, 1.0, 1.0, vc.c_m, 1.1).unwrap();
        let inp = AdmissibilityInputs { variant, ..scalar_inputs(&s, &a, r) };
        assert!(check_assumption(&inp, &[0]).unwrap().passed(), "{variant:?} r = {r}");
        let r2 = suggest_r(RChoice::InjectiveZero { lam_min_ata: 1.0 }, 1.0, 1.0, vc.c_m_prime, 1.1).unwrap();
        let inp = AdmissibilityInputs { variant, ..scalar_inputs(&s, &a, r2) };
        assert!(check_strengthened_assumption(&inp, &[0]).unwrap().passed());
    }
}

#[test]
fn schedule_examples() {
    let a = LinearMap::identity(1);
    let zero = make_schedule(&ScheduleSpec::Zero, &a, 10.0).unwrap();
    assert_eq!((zero.mu1(), zero.mu2()), (0.0, 0.0));
    let pl = make_schedule(&ScheduleSpec::ProxLinear { t: 0.05 }, &a, 10.0).unwrap();
    assert!(close(pl.m1(0).data()[0], 10.0));
    assert!(close(pl.mu1(), 10.0));
    assert!(make_schedule(&ScheduleSpec::ProxLinear { t: 0.2 }, &a, 10.0).is_err());
    let two = ScheduleSpec::Constant { m1: MetricMatrix::scaled_identity(2, 2.0), m2: MetricMatrix::zeros(1) };
    let c = make_schedule(&two, &LinearMap::from_rows(&[vec![1.0, 1.0]]).unwrap(), 1.0).unwrap();
    assert!(close(c.mu1(), 2.0));
}

#[test]
fn report_text_lists_checks() {
    let a = LinearMap::identity(1);
    let s = MetricSchedule::zero(1, 1);
    let text = check_assumption(&scalar_inputs(&s, &a, 10.0), &[0, 1]).unwrap().to_text();
    assert!(text.contains("check.r_bound = pass"));
    assert!(text.contains("check.metric_positivity.k1 = pass"));
    assert!(text.contains("admissible = pass"));
}

proptest! {
    #[test]
    fn t0_vanishes_only_at_rho_one(rho in 0.01f64..1.99, r in 0.1f64..100.0, lam in 0.01f64..10.0) {
        let (t0, t1) = relaxation_constants(rho, r, lam).unwrap();
        prop_assert!(t0 >= 0.0 && t1 > 0.0);
        if (rho - 1.0).abs() > 1e-9 {
            prop_assert!(t0 > 0.0);
        }
    }

    #[test]
    fn t1_is_continuous_at_rho_one(lam in 0.01f64..10.0) {
        let (_, below) = relaxation_constants(1.0 - 1e-9, 1.0, lam).unwrap();
        let (_, above) = relaxation_constants(1.0 + 1e-9, 1.0, lam).unwrap();
        prop_assert!((below - above).abs() <= 1e-7 / lam);
    }

    #[test]
    fn strengthened_implies_standard(
        r in 0.5f64..60.0, rho in 0.1f64..1.9, mu1 in 0.0f64..3.0, l in 0.1f64..3.0, pl in any::<bool>()
    ) {
        let variant = if pl { Variant::PlAdmm } else { Variant::PAdmm };
        let a = LinearMap::from_rows(&[vec![1.0, 0.3], vec![0.0, 0.8]]).unwrap();
        let s = MetricSchedule::constant(MetricMatrix::scaled_identity(2, mu1), MetricMatrix::zeros(2)).unwrap();
        let inp = AdmissibilityInputs { schedule: &s, a: &a, r, rho, l, gamma: 1.1, variant };
        if check_strengthened_assumption(&inp, &[0]).unwrap().passed() {
            prop_assert!(check_assumption(&inp, &[0]).unwrap().passed());
        }
        let vc = variant_constants(l, mu1, r, 1.0, variant);
        prop_assert!(vc.c_m_prime > vc.c_m);
    }
}
