//! Sampling behaviour of the estimator and of its variance estimate.

use mvsens::inference::{delta_variance, sample_variance};
use mvsens::rng::derive_seed;
use mvsens::{estimate_index, evaluate_pairs, generate_design, SubsetIndex, VectorModel};

/// Asymptotic variance of `sqrt(N) (S_N - S)` for `identity_2`, `u = {1}`,
/// standard normal inputs.
///
/// With `S = 1/2` and `Tr Sigma = 2`, the influence function is
/// `(X1^2 / 2 + X2 X2' - (X2^2 + X2'^2) / 4) / 2`, whose variance is
/// `(1/2 + 1 + 1/4) / 4`.
const IDENTITY_SIGMA2: f64 = 7.0 / 16.0;

#[test]
fn delta_variance_matches_replication_and_closed_form() {
    let model = VectorModel::identity_2();
    let space = model.default_space();
    let u = SubsetIndex::from_one_based(&[1], 2).unwrap();
    let n = 2000;
    let reps = 1000;
    let mut estimates = Vec::with_capacity(reps);
    let mut sigma2 = Vec::with_capacity(reps);
    for r in 0..reps {
        let design = generate_design(&space, &u, n, derive_seed(77, r as u64)).unwrap();
        let sample = evaluate_pairs(&model, &design).unwrap();
        estimates.push(estimate_index(&sample).unwrap());
        sigma2.push(delta_variance(&sample).unwrap());
    }
    let empirical = n as f64 * sample_variance(&estimates);
    let mean_sigma2 = sigma2.iter().sum::<f64>() / reps as f64;
    let ratio = empirical / mean_sigma2;
    assert!(
        (0.8..=1.25).contains(&ratio),
        "N Var / sigma2_hat = {ratio}"
    );
    assert!(
        (mean_sigma2 / IDENTITY_SIGMA2 - 1.0).abs() < 0.05,
        "mean sigma2_hat {mean_sigma2}"
    );
    assert!(
        (empirical / IDENTITY_SIGMA2 - 1.0).abs() < 0.2,
        "N Var {empirical}"
    );
}

#[test]
fn estimates_stay_near_the_unit_interval() {
    let u = SubsetIndex::from_one_based(&[2], 2).unwrap();
    for model in [VectorModel::identity_2(), VectorModel::sum_prod()] {
        for r in 0..200 {
            let design =
                generate_design(&model.default_space(), &u, 2000, derive_seed(5, r)).unwrap();
            let s = estimate_index(&evaluate_pairs(&model, &design).unwrap()).unwrap();
            assert!(
                (-0.05..=1.05).contains(&s),
                "{} replicate {r}: {s}",
                model.name()
            );
        }
    }
}
