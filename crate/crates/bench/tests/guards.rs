//! The suite must be able to fail: corrupted constants are caught and an
//! empty instance list is rejected instead of passing vacuously.

use ncadmm::{MeritRegime, Variant};
use ncadmm_bench::{acceptance_suite_on, run_cell, suite_instances, SuiteOptions};

#[test]
fn halved_c5_trips_the_subgradient_bound() {
    let instances = suite_instances(7).unwrap();
    let mut opts = SuiteOptions::new(7);
    opts.iterations = 500;
    let mut caught = 0;
    for inst in &instances {
        for v in [Variant::PAdmm, Variant::PlAdmm] {
            let honest = run_cell(inst, v, 1.0, MeritRegime::Standard, &opts).unwrap();
            assert!(honest.audit.bound_d.is_empty());
            opts.c5_scale = 0.5;
            let bad = run_cell(inst, v, 1.0, MeritRegime::Standard, &opts).unwrap();
            opts.c5_scale = 1.0;
            caught += bad.audit.bound_d.len();
        }
    }
    assert!(caught > 0, "halving C5 went unnoticed");
}

#[test]
fn empty_instance_list_is_an_error() {
    let err = acceptance_suite_on(&[], &SuiteOptions::new(7)).unwrap_err();
    assert!(err.to_string().contains("at least"));
}

#[test]
fn too_few_instances_is_an_error() {
    let mut instances = suite_instances(7).unwrap();
    instances.truncate(3);
    assert!(acceptance_suite_on(&instances, &SuiteOptions::new(7)).is_err());
}

#[test]
fn suite_instances_are_seed_deterministic() {
    let a = suite_instances(11).unwrap();
    let b = suite_instances(11).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.name, y.name);
        assert_eq!(x.problem.spec.a, y.problem.spec.a);
    }
}
