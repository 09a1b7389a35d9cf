use nalgebra::DMatrix;
use proptest::prelude::*;

use mvsens::oracle::covariances_linear;
use mvsens::{
    estimate_index, estimate_index_general, exact_index, CovarianceTriple, PickFreezeSample,
    ProjectionMatrix, RowMatrix, SubsetIndex,
};

fn matrix(k: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, k * k).prop_map(move |v| DMatrix::from_row_slice(k, k, &v))
}

fn sample(k: usize) -> impl Strategy<Value = PickFreezeSample> {
    (10usize..60).prop_flat_map(move |n| {
        prop::collection::vec(-5.0..5.0f64, 2 * n * k).prop_map(move |v| {
            let (a, b) = v.split_at(n * k);
            PickFreezeSample::new(
                RowMatrix::from_vec(n, k, a.to_vec()).unwrap(),
                RowMatrix::from_vec(n, k, b.to_vec()).unwrap(),
                None,
            )
            .unwrap()
        })
    })
}

fn linear_triple(k: usize, p: usize) -> impl Strategy<Value = CovarianceTriple> {
    (
        prop::collection::vec(-2.0..2.0f64, k * p),
        prop::collection::vec(0.1..3.0f64, p),
        1usize..(1 << p) - 1,
    )
        .prop_filter_map("singular output covariance", move |(a, var, mask)| {
            let a = DMatrix::from_row_slice(k, p, &a);
            let members = (0..p).filter(|j| mask & (1 << j) != 0).collect();
            let u = SubsetIndex::new(members, p).unwrap();
            covariances_linear(&a, &var, &u).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// `num + den` and `den - num` are both sums of centered squares.
    #[test]
    fn estimate_within_minus_one_one(s in sample(3)) {
        if let Ok(v) = estimate_index(&s) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn estimate_symmetric_in_pair_order(s in sample(2)) {
        let swapped = PickFreezeSample::new(s.y_u.clone(), s.y.clone(), None).unwrap();
        if let (Ok(a), Ok(b)) = (estimate_index(&s), estimate_index(&swapped)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn general_estimate_at_identity_matches(s in sample(3)) {
        if let Ok(a) = estimate_index(&s) {
            let b = estimate_index_general(&s, &ProjectionMatrix::identity(3)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn orthogonal_invariance(s in sample(3), g in matrix(3)) {
        prop_assume!(g.determinant().abs() > 1e-2);
        let o = g.qr().q();
        if let Ok(a) = estimate_index(&s) {
            let b = estimate_index(&s.transformed(&o).unwrap()).unwrap();
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn transformation_rule_on_samples(s in sample(2), o in matrix(2), m in matrix(2)) {
        let m = ProjectionMatrix::new((&m + m.transpose()) * 0.5).unwrap();
        let pulled = m.congruence(&o).unwrap();
        if let (Ok(a), Ok(b)) = (
            estimate_index_general(&s.transformed(&o).unwrap(), &m),
            estimate_index_general(&s, &pulled),
        ) {
            prop_assume!(a.abs() < 1e3);
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn linear_indices_sum_to_one_for_psd_weights(t in linear_triple(3, 4), b in matrix(3)) {
        let m = ProjectionMatrix::new(&b * b.transpose() + DMatrix::identity(3, 3) * 0.1).unwrap();
        let idx = exact_index(&t, &m).unwrap();
        prop_assert!(idx.sum_residual() <= 1e-10);
        prop_assert!(idx.s_inter.abs() <= 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&idx.s_u));
    }
}
