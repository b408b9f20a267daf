use corrcov::estimator;
use corrcov::linalg::{self, Matrix};
use corrcov::patterns::{self, CorrelationPattern};
use num_complex::Complex64;
use proptest::prelude::*;

fn matrix(rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Matrix<f64>> {
    (rows, cols).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-3.0f64..3.0, r * c).prop_map(move |v| Matrix::from_vec(r, c, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vec_of_triple_product((a, x, b) in (1usize..5, 1usize..5, 1usize..5, 1usize..5).prop_flat_map(|(p, q, r, s)| {
        (matrix(p..=p, q..=q), matrix(q..=q, r..=r), matrix(r..=r, s..=s))
    })) {
        // vec(A X B) = (Bᵀ ⊗ A) vec(X)
        let lhs = linalg::vec(&(&a * &x * &b));
        let rhs = linalg::kronecker(&b.transpose(), &a) * linalg::vec(&x);
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn kronecker_norms_multiply(a in matrix(1..=4, 1..=4), b in matrix(1..=4, 1..=4)) {
        let k = linalg::kronecker(&a, &b);
        let f = linalg::frobenius_norm(&k).unwrap();
        prop_assert!((f - a.norm() * b.norm()).abs() <= 1e-12 * (1.0 + f));
        let s = linalg::spectral_norm(&k).unwrap();
        let want = linalg::spectral_norm(&a).unwrap() * linalg::spectral_norm(&b).unwrap();
        prop_assert!((s - want).abs() <= 1e-10 * (1.0 + want));
    }

    #[test]
    fn psd_square_root_squares_back(g in matrix(1..=5, 1..=5)) {
        let s = &g * g.transpose();
        let r = linalg::psd_sqrt(&s).unwrap();
        prop_assert!((&r * &r - &s).norm() <= 1e-9 * (1.0 + s.norm()));
        prop_assert!((&r - r.transpose()).norm() <= 1e-12 * (1.0 + r.norm()));
    }

    #[test]
    fn estimator_is_linear_in_the_pattern(x in matrix(1..=4, 2..=6), w in 0.0f64..0.9) {
        let m = x.ncols();
        let t = CorrelationPattern::toeplitz(Complex64::new(w, 0.0), m).unwrap().materialize::<f64>().unwrap();
        let i = Matrix::identity(m, m);
        let sum = estimator::correlated_sample_covariance(&x, &(&t + &i)).unwrap();
        let parts = estimator::correlated_sample_covariance(&x, &t).unwrap()
            + estimator::correlated_sample_covariance(&x, &i).unwrap();
        prop_assert!((&sum - &parts).norm() <= 1e-12 * (1.0 + sum.norm()));
        let plain = estimator::sample_covariance(&x);
        let with_identity = estimator::correlated_sample_covariance(&x, &i).unwrap();
        prop_assert!((&plain - &with_identity).norm() <= 1e-14 * (1.0 + plain.norm()));
    }

    #[test]
    fn hermitian_pattern_gives_symmetric_estimate(x in matrix(1..=4, 1..=8), w in -0.9f64..0.9) {
        let t = CorrelationPattern::toeplitz(Complex64::new(w, 0.0), x.ncols()).unwrap().materialize::<f64>().unwrap();
        let s = estimator::correlated_sample_covariance(&x, &t).unwrap();
        prop_assert!((&s - s.transpose()).norm() <= 1e-12 * (1.0 + s.norm()));
    }

    #[test]
    fn toeplitz_closed_form_tracks_materialized_norm(r in 0.0f64..0.95, phi in 0.0f64..std::f64::consts::TAU, m in 1usize..40) {
        let w = Complex64::from_polar(r, phi);
        let b = CorrelationPattern::toeplitz(w, m).unwrap().materialize_complex();
        let closed = patterns::toeplitz_frobenius_sq(w, m).unwrap();
        prop_assert!((closed - b.norm_squared()).abs() <= 1e-10 * closed);
        prop_assert_eq!(linalg::trace(&b).unwrap(), Complex64::new(m as f64, 0.0));
    }
}
