use ncadmm::linops::LinearMap;
use ncadmm::problems::{
    kkt_check, l0_from_data, l0_least_squares, lasso_from_data, lasso_problem, oracle_distance,
    quadratic_quadratic, quadratic_quadratic_from_data, Oracle, ProblemDescriptor,
};
use proptest::prelude::*;

fn one() -> LinearMap {
    LinearMap::identity(1)
}

fn oracle_xzy(o: &Oracle) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    match o {
        Oracle::ClosedForm { x, z, y }
        | Oracle::SupportEnumeration { x, z, y, .. }
        | Oracle::Reference { x, z, y, .. } => (x.clone(), z.clone(), y.clone()),
        other => panic!("no multiplier in {}", other.kind()),
    }
}

#[test]
fn scalar_quadratic_oracle() {
    let tp = quadratic_quadratic_from_data(one(), vec![1.0], 1.0, vec![0.0], one()).unwrap();
    let (x, z, y) = oracle_xzy(&tp.oracle);
    for v in [x[0], z[0], y[0]] {
        assert!((v - 0.5).abs() < 1e-15, "{v}");
    }
    let free = quadratic_quadratic_from_data(one(), vec![1.7], 0.0, vec![0.0], one()).unwrap();
    let (x, _, y) = oracle_xzy(&free.oracle);
    assert!((x[0] - 1.7).abs() < 1e-15);
    assert_eq!(y[0], 0.0);
}

#[test]
fn scalar_lasso_oracle() {
    let tp = lasso_from_data(one(), vec![3.0], one(), 1.0).unwrap();
    assert_eq!(tp.oracle.kind(), "grid_search");
    assert!((tp.oracle.x().unwrap()[0] - 2.0).abs() <= 1e-6);
    let dead = lasso_from_data(one(), vec![0.8], one(), 1.0).unwrap();
    assert!(dead.oracle.x().unwrap()[0].abs() <= 1e-6);
    assert!(lasso_from_data(one(), vec![1.0], one(), 0.0).is_err());
}

#[test]
fn scalar_l0_oracle() {
    let small = l0_from_data(one(), vec![0.5], 0.5).unwrap();
    assert_eq!(small.oracle.x().unwrap(), &[0.0]);
    let big = l0_from_data(one(), vec![2.0], 0.5).unwrap();
    assert_eq!(big.oracle.x().unwrap(), &[2.0]);
    let (x, z, y) = oracle_xzy(&big.oracle);
    assert!(kkt_check(&big.spec, &x, &z, &y, 1e-12).0);
    let (x, z, y) = oracle_xzy(&small.oracle);
    let (ok, res) = kkt_check(&small.spec, &x, &z, &y, 1e-12);
    assert!(ok && res.membership);
}

#[test]
fn oracles_satisfy_kkt_and_perturbations_do_not() {
    for tp in [quadratic_quadratic(5, 3, 4).unwrap(), l0_least_squares(5, 5, 0.05, 4).unwrap()] {
        let (x, z, y) = oracle_xzy(&tp.oracle);
        assert!(kkt_check(&tp.spec, &x, &z, &y, 1e-9).0, "{}", tp.descriptor);
        let moved: Vec<f64> = x.iter().map(|v| v + 0.1).collect();
        assert!(!kkt_check(&tp.spec, &moved, &z, &y, 1e-9).0, "{}", tp.descriptor);
        assert!((oracle_distance(&tp, &moved).unwrap() - 0.1 * (x.len() as f64).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn lasso_reference_is_a_kkt_point() {
    let tp = lasso_problem(6, 4, 2, 0.1, 3).unwrap();
    let (x, z, y) = oracle_xzy(&tp.oracle);
    let (ok, res) = kkt_check(&tp.spec, &x, &z, &y, 1e-8);
    assert!(ok, "{res:?}");
}

#[test]
fn generators_reject_bad_shapes() {
    assert!(quadratic_quadratic(3, 4, 1).is_err());
    assert!(quadratic_quadratic(3, 0, 1).is_err());
    assert!(lasso_problem(2, 3, 1, 0.1, 1).is_err());
    assert!(l0_least_squares(4, 3, 0.1, 1).is_err());
    assert!(l0_least_squares(11, 11, 0.1, 1).is_err());
}

#[test]
fn descriptors_round_trip_and_build() {
    let d = ProblemDescriptor::Lasso { n: 4, m: 2, sparsity: 1, lambda: 0.2, seed: 9 };
    let text = serde_json::to_string(&d).unwrap();
    assert!(text.contains("\"generator\":\"lasso\""));
    let back: ProblemDescriptor = serde_json::from_str(&text).unwrap();
    assert_eq!(back, d);
    let tp = back.build().unwrap();
    assert_eq!((tp.spec.n(), tp.spec.m(), tp.seed), (4, 2, 9));
    let q = ProblemDescriptor::QuadraticQuadratic { n: 3, m: 2, seed: 1 }.build().unwrap();
    assert_eq!(q.oracle.kind(), "closed_form");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seeded_instances_are_deterministic(seed in 0u64..1000, n in 2usize..6) {
        let a = quadratic_quadratic(n, n - 1, seed).unwrap();
        let b = quadratic_quadratic(n, n - 1, seed).unwrap();
        prop_assert_eq!(a.spec.a, b.spec.a);
        prop_assert_eq!(a.oracle, b.oracle);
    }

    #[test]
    fn l0_oracle_beats_every_support(seed in 0u64..1000, lambda in 0.0f64..0.3) {
        let tp = l0_least_squares(4, 4, lambda, seed).unwrap();
        let Oracle::SupportEnumeration { value, x, .. } = &tp.oracle else { panic!() };
        prop_assert!((tp.spec.objective(x) - value).abs() <= 1e-12);
        // Zeroing any coordinate cannot improve the global value.
        for i in 0..4 {
            let mut w = x.clone();
            w[i] = 0.0;
            prop_assert!(tp.spec.objective(&w) >= value - 1e-12);
        }
    }
}
