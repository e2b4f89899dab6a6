use ncadmm::linops::{loewner_check, metric_norm_sq, LinearMap, MetricMatrix};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn apply_examples() {
    assert_eq!(LinearMap::identity(2).apply(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    let row = LinearMap::from_rows(&[vec![1.0, 1.0]]).unwrap();
    assert_eq!(row.apply(&[1.0, 2.0]).unwrap(), vec![3.0]);
    let zero = LinearMap::new(2, 2, vec![0.0; 4]).unwrap();
    assert_eq!(zero.apply(&[5.0, 7.0]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn apply_rejects_wrong_length() {
    assert!(LinearMap::identity(2).apply(&[1.0]).is_err());
    assert!(LinearMap::identity(2).adjoint(&[1.0, 2.0, 3.0]).is_err());
}

#[test]
fn lambda_min_aat_examples() {
    assert!(close(LinearMap::identity(2).lambda_min_aat(), 1.0, 1e-12));
    assert!(close(LinearMap::diagonal(&[2.0, 3.0]).unwrap().lambda_min_aat(), 4.0, 1e-12));
    let rank1 = LinearMap::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
    assert_eq!(rank1.lambda_min_aat(), 0.0);
}

#[test]
fn lambda_min_ata_examples() {
    assert!(close(LinearMap::identity(2).lambda_min_ata(), 1.0, 1e-12));
    let col = LinearMap::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
    assert!(close(col.lambda_min_ata(), 2.0, 1e-12));
    let row = LinearMap::from_rows(&[vec![1.0, 1.0]]).unwrap();
    assert_eq!(row.lambda_min_ata(), 0.0);
}

#[test]
fn op_norm_matches_largest_singular_value() {
    // Singular values of [[3, 0], [4, 5]] are sqrt(45) and sqrt(5).
    let a = LinearMap::from_rows(&[vec![3.0, 0.0], vec![4.0, 5.0]]).unwrap();
    assert!(close(a.op_norm(), 45f64.sqrt(), 1e-8));
    assert!(close(a.lambda_min_ata(), 5.0, 1e-10));
}

#[test]
fn metric_norm_examples() {
    let i2 = MetricMatrix::scaled_identity(2, 1.0);
    assert_eq!(metric_norm_sq(&i2, &[3.0, 4.0]).unwrap(), 25.0);
    assert_eq!(metric_norm_sq(&MetricMatrix::zeros(2), &[9.0, -2.0]).unwrap(), 0.0);
    assert_eq!(metric_norm_sq(&MetricMatrix::diagonal(&[2.0, 0.0]), &[1.0, 5.0]).unwrap(), 2.0);
    assert!(metric_norm_sq(&i2, &[1.0]).is_err());
}

#[test]
fn loewner_examples() {
    let two = MetricMatrix::scaled_identity(2, 2.0);
    assert!(loewner_check(&two, 1.0));
    assert!(!loewner_check(&two, 3.0));
    assert!(loewner_check(&MetricMatrix::diagonal(&[1.0, 4.0]), 1.0));
}

#[test]
fn metric_matrix_rejects_asymmetry() {
    assert!(MetricMatrix::new(2, vec![1.0, 2.0, 0.0, 1.0]).is_err());
}

#[test]
fn matrix_text_round_trip() {
    let a = LinearMap::from_rows(&[vec![1.5, -2.0, 0.1], vec![0.0, 3.0, 1e-7]]).unwrap();
    let back = LinearMap::parse_text(&a.to_text()).unwrap();
    assert_eq!(a, back);
    assert!(LinearMap::parse_text("2 2\n1 2\n3").is_err());
    assert!(LinearMap::parse_text("1 2\n1 x").is_err());
}

fn matrix() -> impl Strategy<Value = LinearMap> {
    (1usize..6, 1usize..6).prop_flat_map(|(m, n)| {
        prop::collection::vec(-3.0f64..3.0, m * n).prop_map(move |d| LinearMap::new(m, n, d).unwrap())
    })
}

fn matrix_and_vectors() -> impl Strategy<Value = (LinearMap, Vec<f64>, Vec<f64>)> {
    matrix().prop_flat_map(|a| {
        let (m, n) = (a.rows(), a.cols());
        (Just(a), prop::collection::vec(-5.0f64..5.0, n), prop::collection::vec(-5.0f64..5.0, m))
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn adjoint_is_the_transpose((a, x, y) in matrix_and_vectors()) {
        let lhs = dot(&a.apply(&x).unwrap(), &y);
        let rhs = dot(&x, &a.adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + norm(&x) * norm(&y)) * 10.0);
    }

    #[test]
    fn eigenvalue_lower_bound_on_adjoint((a, _x, y) in matrix_and_vectors()) {
        let lhs = a.lambda_min_aat() * dot(&y, &y);
        let aty = a.adjoint(&y).unwrap();
        let rhs = dot(&aty, &aty);
        prop_assert!(lhs <= rhs + 1e-10 * (1.0 + rhs));
    }

    #[test]
    fn operator_norm_bounds_the_image((a, x, _y) in matrix_and_vectors()) {
        prop_assert!(norm(&a.apply(&x).unwrap()) <= a.op_norm() * norm(&x) * (1.0 + 1e-10) + 1e-12);
    }
}
