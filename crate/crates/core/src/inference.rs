//! Uncertainty of the pick-freeze estimate.
//!
//! The estimate is a smooth function `g` of sample means of the per-pair
//! statistics
//!
//! ```text
//!   a_i = sum_l Y_il Y^u_il,  b_i = sum_l (Y_il^2 + Y^u_il^2)/2,  c_il = (Y_il + Y^u_il)/2
//! ```
//!
//! namely `g = (mean a - |mean c|^2) / (mean b - |mean c|^2)`. The delta method
//! gives `N Var(S_u,N) ~ grad(g)^t Cov(a, b, c) grad(g)`, which equals the
//! empirical variance of the linearized values
//! `psi_i = (a_i - S b_i - 2 (1 - S) <mean c, c_i>) / D`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::VectorModel;
use crate::pickfreeze::{
    estimate_index, estimator_terms, evaluate_pairs, generate_design, PickFreezeSample,
};
use crate::rng::{derive_seed, row_rng, streams};
use crate::space::InputSpace;
use crate::subset::SubsetIndex;

pub const MIN_DELTA_PAIRS: usize = 10;
pub const MIN_BOOTSTRAP_REPS: usize = 200;
pub const MIN_REPLICATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CiMethod {
    Delta,
    Bootstrap { b_reps: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    pub value: f64,
    /// Estimate of the asymptotic variance of `sqrt(N) (S_u,N - S_u)`.
    pub sigma2_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    pub method: CiMethod,
    pub n: usize,
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal parameters are valid")
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Contract(format!(
            "confidence level {level} is not in (0, 1)"
        )));
    }
    Ok(())
}

/// Delta-method estimate of the asymptotic variance `sigma^2`.
pub fn delta_variance(sample: &PickFreezeSample) -> Result<f64> {
    if sample.len() < MIN_DELTA_PAIRS {
        return Err(Error::Contract(format!(
            "delta method needs at least {MIN_DELTA_PAIRS} pairs, got {}",
            sample.len()
        )));
    }
    let (num, den) = estimator_terms(sample)?;
    let n = sample.len();
    let nf = n as f64;
    let s = num / den;
    let d = den / nf;
    let k = sample.out_dims();
    let c_bar: Vec<f64> = (0..k)
        .map(|l| {
            let mut acc = crate::table::CompensatedSum::default();
            for i in 0..n {
                acc.add((sample.y.get(i, l) + sample.y_u.get(i, l)) / 2.0);
            }
            acc.value() / nf
        })
        .collect();
    let psi: Vec<f64> = (0..n)
        .map(|i| {
            let (y, yu) = (sample.y.row(i), sample.y_u.row(i));
            let mut a = 0.0;
            let mut b = 0.0;
            let mut c = 0.0;
            for l in 0..k {
                a += y[l] * yu[l];
                b += (y[l] * y[l] + yu[l] * yu[l]) / 2.0;
                c += c_bar[l] * (y[l] + yu[l]) / 2.0;
            }
            (a - s * b - 2.0 * (1.0 - s) * c) / d
        })
        .collect();
    Ok(sample_variance(&psi).max(0.0))
}

/// Normal-approximation interval `S +- z sqrt(sigma2_hat / N)`.
pub fn delta_ci(sample: &PickFreezeSample, level: f64) -> Result<IndexEstimate> {
    check_level(level)?;
    let value = estimate_index(sample)?;
    let sigma2_hat = delta_variance(sample)?;
    let z = standard_normal().inverse_cdf(0.5 + level / 2.0);
    let half = z * (sigma2_hat / sample.len() as f64).sqrt();
    Ok(IndexEstimate {
        value,
        sigma2_hat,
        ci_low: value - half,
        ci_high: value + half,
        ci_level: level,
        method: CiMethod::Delta,
        n: sample.len(),
    })
}

/// Percentile bootstrap over pair indices; `(Y_i, Y^u_i)` stay together.
/// `sigma2_hat` is `N` times the variance of the replicates.
pub fn bootstrap_ci(
    sample: &PickFreezeSample,
    b_reps: usize,
    level: f64,
    seed: u64,
) -> Result<IndexEstimate> {
    if b_reps < MIN_BOOTSTRAP_REPS {
        return Err(Error::Contract(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_REPS} replicates, got {b_reps}"
        )));
    }
    check_level(level)?;
    let value = estimate_index(sample)?;
    let n = sample.len();
    let mut replicates = (0..b_reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = row_rng(seed, streams::BOOTSTRAP, b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            estimate_index(&sample.select(&idx))
        })
        .collect::<Result<Vec<f64>>>()?;
    let sigma2_hat = n as f64 * sample_variance(&replicates);
    replicates.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok(IndexEstimate {
        value,
        sigma2_hat,
        ci_low: quantile_sorted(&replicates, alpha / 2.0),
        ci_high: quantile_sorted(&replicates, 1.0 - alpha / 2.0),
        ci_level: level,
        method: CiMethod::Bootstrap { b_reps, seed },
        n,
    })
}

/// How intervals are built in a replication study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntervalSpec {
    Delta { level: f64 },
    Bootstrap { b_reps: usize, level: f64 },
}

impl IntervalSpec {
    pub fn build(&self, sample: &PickFreezeSample, seed: u64) -> Result<IndexEstimate> {
        match *self {
            IntervalSpec::Delta { level } => delta_ci(sample, level),
            IntervalSpec::Bootstrap { b_reps, level } => bootstrap_ci(sample, b_reps, level, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub n_per_rep: usize,
    pub reps: usize,
    pub estimates: Vec<f64>,
    pub target: f64,
    pub mean: f64,
    pub std_empirical: f64,
    /// Kolmogorov-Smirnov distance of the standardized estimates to N(0, 1).
    pub normality_stat: f64,
    /// Fraction of intervals containing `target`.
    pub coverage: f64,
    pub interval: IntervalSpec,
    /// `std(N) / std(4N)`, set by [`clt_paired_scale`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_ratio: Option<f64>,
    pub seed: u64,
}

/// `reps` independent estimations at `n_per_rep` pairs each, with 95% delta
/// intervals for the coverage figure.
pub fn clt_diagnostic(
    model: &VectorModel,
    space: &InputSpace,
    u: &SubsetIndex,
    n_per_rep: usize,
    reps: usize,
    target: f64,
    seed: u64,
) -> Result<ReplicationReport> {
    replication_study(
        model,
        space,
        u,
        n_per_rep,
        reps,
        target,
        IntervalSpec::Delta { level: 0.95 },
        seed,
    )
}

/// Replication study with a chosen interval construction.
#[allow(clippy::too_many_arguments)]
pub fn replication_study(
    model: &VectorModel,
    space: &InputSpace,
    u: &SubsetIndex,
    n_per_rep: usize,
    reps: usize,
    target: f64,
    interval: IntervalSpec,
    seed: u64,
) -> Result<ReplicationReport> {
    if reps < MIN_REPLICATIONS {
        return Err(Error::Contract(format!(
            "replication study needs at least {MIN_REPLICATIONS} replications, got {reps}"
        )));
    }
    if !target.is_finite() {
        return Err(Error::Contract("replication target must be finite".into()));
    }
    let runs = (0..reps)
        .into_par_iter()
        .map(|r| {
            let rep_seed = derive_seed(seed, r as u64);
            let design = generate_design(space, u, n_per_rep, rep_seed)?;
            let sample = evaluate_pairs(model, &design)?;
            let est = interval.build(&sample, derive_seed(rep_seed, 1))?;
            Ok((est.value, est.ci_low <= target && target <= est.ci_high))
        })
        .collect::<Result<Vec<(f64, bool)>>>()?;
    let estimates: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let covered = runs.iter().filter(|r| r.1).count();
    let mean = estimates.iter().sum::<f64>() / reps as f64;
    let std_empirical = sample_variance(&estimates).sqrt();
    Ok(ReplicationReport {
        n_per_rep,
        reps,
        target,
        mean,
        std_empirical,
        normality_stat: ks_standardized(&estimates),
        coverage: covered as f64 / reps as f64,
        interval,
        std_ratio: None,
        seed,
        estimates,
    })
}

/// Runs [`clt_diagnostic`] at `n` and `4n`; the first report carries
/// `std_ratio = std(n) / std(4n)`, which should be near 2.
pub fn clt_paired_scale(
    model: &VectorModel,
    space: &InputSpace,
    u: &SubsetIndex,
    n: usize,
    reps: usize,
    target: f64,
    seed: u64,
) -> Result<(ReplicationReport, ReplicationReport)> {
    let mut base = clt_diagnostic(model, space, u, n, reps, target, seed)?;
    let quadrupled = clt_diagnostic(
        model,
        space,
        u,
        4 * n,
        reps,
        target,
        derive_seed(seed, u64::MAX),
    )?;
    base.std_ratio = Some(base.std_empirical / quadrupled.std_empirical);
    Ok((base, quadrupled))
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// KS distance between the empirical law of `(v - mean) / std` and N(0, 1).
/// Returns 1 when the values have no spread.
pub fn ks_standardized(values: &[f64]) -> f64 {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = sample_variance(values).sqrt();
    if !(sd > 0.0) {
        return 1.0;
    }
    let mut z: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let normal = standard_normal();
    z.iter().enumerate().fold(0.0, |d: f64, (i, zi)| {
        let f = normal.cdf(*zi);
        let upper = (i + 1) as f64 / n as f64 - f;
        let lower = f - i as f64 / n as f64;
        d.max(upper).max(lower)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(model: &VectorModel, space: &InputSpace, n: usize, seed: u64) -> PickFreezeSample {
        let u = SubsetIndex::new(vec![0], space.dims()).unwrap();
        evaluate_pairs(model, &generate_design(space, &u, n, seed).unwrap()).unwrap()
    }

    #[test]
    fn u_only_has_zero_variance() {
        let model = VectorModel::u_only(2, vec![0], 2).unwrap();
        let s = sample(&model, &InputSpace::uniform_unit(2), 500, 1);
        assert_eq!(delta_variance(&s).unwrap(), 0.0);
        let b = bootstrap_ci(&s, 200, 0.95, 3).unwrap();
        assert_eq!((b.ci_low, b.ci_high, b.value), (1.0, 1.0, 1.0));
    }

    #[test]
    fn delta_variance_is_scale_invariant() {
        let s = sample(
            &VectorModel::sum_prod(),
            &InputSpace::uniform_unit(2),
            2000,
            4,
        );
        let a = delta_variance(&s).unwrap();
        let b = delta_variance(&s.scaled(3.0)).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn delta_matches_finite_difference_gradient() {
        // recompute grad(g)^t Cov grad(g) with numerical derivatives of g
        let s = sample(
            &VectorModel::sum_prod(),
            &InputSpace::uniform_unit(2),
            3000,
            6,
        );
        let n = s.len();
        let k = 2;
        let stats: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let (y, yu) = (s.y.row(i), s.y_u.row(i));
                let mut v = vec![
                    (0..k).map(|l| y[l] * yu[l]).sum(),
                    (0..k).map(|l| (y[l] * y[l] + yu[l] * yu[l]) / 2.0).sum(),
                ];
                v.extend((0..k).map(|l| (y[l] + yu[l]) / 2.0));
                v
            })
            .collect();
        let dim = stats[0].len();
        let mean: Vec<f64> = (0..dim)
            .map(|j| stats.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let g = |m: &[f64]| {
            let q: f64 = m[2..].iter().map(|c| c * c).sum();
            (m[0] - q) / (m[1] - q)
        };
        let grad: Vec<f64> = (0..dim)
            .map(|j| {
                let h = 1e-6;
                let mut up = mean.clone();
                let mut dn = mean.clone();
                up[j] += h;
                dn[j] -= h;
                (g(&up) - g(&dn)) / (2.0 * h)
            })
            .collect();
        let mut var = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                let cov = stats
                    .iter()
                    .map(|r| (r[a] - mean[a]) * (r[b] - mean[b]))
                    .sum::<f64>()
                    / (n - 1) as f64;
                var += grad[a] * cov * grad[b];
            }
        }
        let delta = delta_variance(&s).unwrap();
        assert!((delta - var).abs() < 1e-5 * var, "{delta} vs {var}");
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let s = sample(
            &VectorModel::identity_2(),
            &InputSpace::standard_normal(2),
            300,
            2,
        );
        let a = bootstrap_ci(&s, 250, 0.9, 11).unwrap();
        let b = bootstrap_ci(&s, 250, 0.9, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low < a.ci_high);
        assert!(bootstrap_ci(&s, 199, 0.9, 11).is_err());
    }

    #[test]
    fn delta_ci_contains_value() {
        let s = sample(
            &VectorModel::identity_2(),
            &InputSpace::standard_normal(2),
            300,
            2,
        );
        let e = delta_ci(&s, 0.95).unwrap();
        assert!(e.ci_low <= e.value && e.value <= e.ci_high);
        assert!(delta_ci(&s, 1.0).is_err());
    }

    #[test]
    fn too_few_pairs_for_delta() {
        let s = sample(
            &VectorModel::identity_2(),
            &InputSpace::standard_normal(2),
            9,
            2,
        );
        assert!(delta_variance(&s).is_err());
    }

    #[test]
    fn ks_of_normal_quantiles_is_small() {
        let normal = standard_normal();
        let v: Vec<f64> = (0..1000)
            .map(|i| normal.inverse_cdf((i as f64 + 0.5) / 1000.0))
            .collect();
        assert!(ks_standardized(&v) < 0.01);
        let skewed: Vec<f64> = (0..1000)
            .map(|i| ((i as f64 + 0.5) / 1000.0).powi(8))
            .collect();
        assert!(ks_standardized(&skewed) > 0.15);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.625), 3.5);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
    }
}
