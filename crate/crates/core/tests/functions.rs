use ncadmm::functions::{
    descent_lemma_check, grad_check, prox_box, prox_l0, prox_l1, prox_objective, prox_oracle, prox_quadratic,
    semiconvexity_check, subdiff_member_l0, subdiff_member_l1, CosineSum, Grid, ProxFunction, Quadratic, SmoothFunction,
};
use ncadmm::linops::LinearMap;
use ncadmm::rng::Lcg;
use proptest::prelude::*;

const SCAN: Grid = Grid { lo: -5.0, hi: 5.0, step: 1e-4 };

#[test]
fn prox_l1_examples() {
    assert_eq!(prox_l1(&[3.0], 1.0, 1.0), vec![2.0]);
    assert_eq!(prox_l1(&[0.0, 0.0, 0.0], 0.7, 2.0), vec![0.0; 3]);
    assert_eq!(prox_l1(&[-0.5], 1.0, 1.0), vec![0.0]);
    // Same answers from the exhaustive scan.
    let g = ProxFunction::L1 { lambda: 1.0 };
    assert!((prox_oracle(&g, &[3.0], 1.0, SCAN).unwrap()[0] - 2.0).abs() < 1e-3);
    assert!(prox_oracle(&g, &[-0.5], 1.0, SCAN).unwrap()[0].abs() < 1e-3);
}

#[test]
fn prox_l0_examples() {
    // γλ = 0.5, so the threshold is sqrt(2·0.5) = 1.
    assert_eq!(prox_l0(&[2.0], 1.0, 0.5), vec![2.0]);
    assert_eq!(prox_l0(&[0.9], 1.0, 0.5), vec![0.0]);
    assert_eq!(prox_l0(&[1.0], 1.0, 0.5), vec![0.0], "tie goes to the sparser point");
    // Two-candidate comparison ½(v − w)² + γλ·[w ≠ 0] over w ∈ {0, v}.
    for v in [2.0, 0.9, 1.0, -1.7] {
        let keep = 0.5;
        let zero = 0.5 * v * v;
        let expect = if keep < zero { v } else { 0.0 };
        assert_eq!(prox_l0(&[v], 1.0, 0.5)[0], expect, "v = {v}");
    }
}

#[test]
fn prox_box_examples() {
    assert_eq!(prox_box(&[5.0], &[0.0], &[1.0]).unwrap(), vec![1.0]);
    assert_eq!(prox_box(&[0.3], &[0.0], &[1.0]).unwrap(), vec![0.3]);
    assert_eq!(prox_box(&[-2.0, 3.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap(), vec![0.0, 1.0]);
    assert!(prox_box(&[0.0], &[1.0], &[0.0]).is_err());
}

#[test]
fn prox_quadratic_examples() {
    let fixed = prox_quadratic(&[1.5, -2.0], 0.3, &[1.5, -2.0], 2.0);
    assert!((fixed[0] - 1.5).abs() < 1e-15 && (fixed[1] + 2.0).abs() < 1e-15);
    assert_eq!(prox_quadratic(&[1.0], 1.0, &[0.0], 1.0), vec![0.5]);
    assert!((prox_quadratic(&[1.0], 1.0, &[0.0], 9.0)[0] - 0.1).abs() < 1e-15);
}

#[test]
fn subdifferential_membership_examples() {
    assert!(subdiff_member_l1(&[0.0], &[0.5], 1.0, 1e-9));
    assert!(subdiff_member_l1(&[2.0], &[1.0], 1.0, 1e-9));
    assert!(!subdiff_member_l1(&[2.0], &[0.0], 1.0, 1e-9));
    assert!(subdiff_member_l0(&[0.0], &[7.0], 1.0, 1e-9));
    assert!(subdiff_member_l0(&[3.0], &[0.0], 1.0, 1e-9));
    assert!(!subdiff_member_l0(&[3.0], &[1.0], 1.0, 1e-9));
}

#[test]
fn prox_oracle_examples() {
    let zero = ProxFunction::Zero;
    assert!((prox_oracle(&zero, &[1.23456], 1.0, Grid { lo: -5.0, hi: 5.0, step: 1e-3 }).unwrap()[0] - 1.235).abs() < 1e-9);
    let l0 = ProxFunction::L0 { lambda: 0.5 };
    assert_eq!(prox_oracle(&l0, &[0.9], 1.0, Grid { lo: -5.0, hi: 5.0, step: 1e-3 }).unwrap()[0].abs(), 0.0);
    assert!(prox_oracle(&zero, &[1.0], 1.0, Grid { lo: 1.0, hi: 0.0, step: 0.1 }).is_err());
    assert!(prox_oracle(&zero, &[1.0, 2.0, 3.0], 1.0, SCAN).is_err());
}

#[test]
fn grad_check_examples() {
    let half = Quadratic::half_sq_dist(&[0.0, 0.0]);
    assert!(grad_check(&half, &[1.0, 2.0]) <= 1e-7);
    let mut rng = Lcg::new(3);
    let b_mat = LinearMap::new(4, 3, rng.uniform_vec(12, -1.0, 1.0)).unwrap();
    let ls = Quadratic::least_squares(&b_mat, &rng.uniform_vec(4, -1.0, 1.0)).unwrap();
    assert!(grad_check(&ls, &rng.uniform_vec(3, -2.0, 2.0)) <= 1e-5);
    assert!(grad_check(&Quadratic::constant(3, 4.0), &[1.0, -1.0, 0.5]) <= 1e-10);
}

#[test]
fn semiconvexity_examples() {
    assert!(semiconvexity_check(&Quadratic::half_sq_dist(&[0.0]), 100, 1));
    let mut rng = Lcg::new(9);
    let b_mat = LinearMap::new(3, 3, rng.uniform_vec(9, -1.0, 1.0)).unwrap();
    let ls = Quadratic::least_squares(&b_mat, &[1.0, 0.0, -1.0]).unwrap();
    assert!(semiconvexity_check(&ls, 100, 2));
    let understated = Quadratic::half_sq_dist(&[0.0]).with_lipschitz(0.1);
    assert!(!semiconvexity_check(&understated, 100, 3));
}

#[test]
fn least_squares_lipschitz_is_largest_gram_eigenvalue() {
    let b_mat = LinearMap::from_rows(&[vec![3.0, 0.0], vec![4.0, 5.0]]).unwrap();
    let ls = Quadratic::least_squares(&b_mat, &[0.0, 0.0]).unwrap();
    assert!((ls.lipschitz() - 45.0).abs() < 1e-9);
}

#[test]
fn lower_bound_inequality_on_quadratics() {
    // With σ = L: h(x) − (1/σ − L/(2σ²))‖∇h(x)‖² ≥ inf h.
    let mut rng = Lcg::new(21);
    let b_mat = LinearMap::new(3, 3, rng.uniform_vec(9, -1.0, 1.0)).unwrap();
    let b = rng.uniform_vec(3, -1.0, 1.0);
    let h = Quadratic::least_squares(&b_mat, &b).unwrap();
    let l = h.lipschitz();
    let coef = 1.0 / l - l / (2.0 * l * l);
    for _ in 0..100 {
        let x = rng.uniform_vec(3, -3.0, 3.0);
        let g = h.grad(&x);
        let lhs = h.eval(&x) - coef * g.iter().map(|v| v * v).sum::<f64>();
        // inf of a least-squares term is nonnegative.
        assert!(lhs >= -1e-9, "lhs = {lhs}");
    }
}

#[test]
fn cosine_sum_is_a_valid_smooth_term() {
    let c = CosineSum { n: 3 };
    assert!(grad_check(&c, &[0.3, -1.2, 2.0]) <= 1e-7);
    assert!(semiconvexity_check(&c, 100, 4));
    assert!(descent_lemma_check(&c, 100, 5));
}

fn prox_case() -> impl Strategy<Value = (ProxFunction, f64, f64)> {
    let g = prop_oneof![
        (0.1f64..2.0).prop_map(|l| ProxFunction::L1 { lambda: l }),
        (0.1f64..2.0).prop_map(|l| ProxFunction::L0 { lambda: l }),
        (0.1f64..2.0, -1.0f64..1.0).prop_map(|(l, c)| ProxFunction::Quadratic { lambda: l, c: vec![c] }),
        (-1.0f64..0.0, 0.0f64..1.0).prop_map(|(lo, hi)| ProxFunction::Box { lower: vec![lo], upper: vec![hi] }),
        Just(ProxFunction::Zero),
    ];
    (g, -3.0f64..3.0, 0.2f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn prox_beats_the_grid_oracle((g, v, gamma) in prox_case()) {
        let p = g.prox(&[v], gamma);
        let grid = Grid { lo: -5.0, hi: 5.0, step: 1e-3 };
        let o = prox_oracle(&g, &[v], gamma, grid).unwrap();
        prop_assert!(prox_objective(&g, &[v], &p, gamma) <= prox_objective(&g, &[v], &o, gamma) + 1e-6);
        prop_assert!(prox_objective(&g, &[v], &p, gamma) <= prox_objective(&g, &[v], &[v], gamma) + 1e-12);
        if g.eval(&[0.0]).is_finite() {
            prop_assert!(prox_objective(&g, &[v], &p, gamma) <= prox_objective(&g, &[v], &[0.0], gamma) + 1e-12);
        }
    }

    #[test]
    fn descent_lemma_on_random_quadratics(seed in 0u64..1000) {
        let mut rng = Lcg::new(seed);
        let b_mat = LinearMap::new(3, 2, rng.uniform_vec(6, -2.0, 2.0)).unwrap();
        let h = Quadratic::least_squares(&b_mat, &rng.uniform_vec(3, -1.0, 1.0)).unwrap();
        prop_assert!(descent_lemma_check(&h, 20, seed));
        let x = rng.uniform_vec(2, -2.0, 2.0);
        prop_assert!(grad_check(&h, &x) <= 1e-5);
    }
}
