//! Independent input laws and seeded sampling.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{row_rng, streams};
use crate::table::RowMatrix;

const PROB_SUM_TOL: f64 = 1e-12;

/// Law of a single input coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Uniform { a: f64, b: f64 },
    Normal { mean: f64, sd: f64 },
    Discrete { points: Vec<f64>, probs: Vec<f64> },
}

impl Marginal {
    pub fn uniform(a: f64, b: f64) -> Self {
        Marginal::Uniform { a, b }
    }

    pub fn normal(mean: f64, sd: f64) -> Self {
        Marginal::Normal { mean, sd }
    }

    pub fn discrete(points: Vec<f64>, probs: Vec<f64>) -> Self {
        Marginal::Discrete { points, probs }
    }

    /// Equal mass on each point.
    pub fn discrete_uniform(points: Vec<f64>) -> Self {
        let p = 1.0 / points.len() as f64;
        let probs = vec![p; points.len()];
        Marginal::Discrete { points, probs }
    }

    /// Checks parameters. The error message names the offending parameter.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        match self {
            Marginal::Uniform { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(("a", "uniform bounds must be finite".into()));
                }
                if a >= b {
                    return Err(("b", format!("uniform requires a < b, got a={a}, b={b}")));
                }
            }
            Marginal::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(("mean", "normal mean must be finite".into()));
                }
                if !(sd.is_finite() && *sd > 0.0) {
                    return Err(("sd", format!("normal sd must be positive, got {sd}")));
                }
            }
            Marginal::Discrete { points, probs } => {
                if points.is_empty() {
                    return Err(("points", "discrete support is empty".into()));
                }
                if points.len() != probs.len() {
                    return Err((
                        "probs",
                        format!("{} points but {} probabilities", points.len(), probs.len()),
                    ));
                }
                if points.iter().any(|x| !x.is_finite()) {
                    return Err(("points", "support points must be finite".into()));
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(("probs", "probabilities must be non-negative".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(("probs", format!("probabilities sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Uniform { a, b } => 0.5 * (a + b),
            Marginal::Normal { mean, .. } => *mean,
            Marginal::Discrete { points, probs } => {
                points.iter().zip(probs).map(|(x, p)| x * p).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Marginal::Uniform { a, b } => (b - a) * (b - a) / 12.0,
            Marginal::Normal { sd, .. } => sd * sd,
            Marginal::Discrete { points, probs } => {
                let m = self.mean();
                points
                    .iter()
                    .zip(probs)
                    .map(|(x, p)| p * (x - m) * (x - m))
                    .sum()
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Marginal::Discrete { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Marginal::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            Marginal::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Marginal::Discrete { points, probs } => {
                let target: f64 = rng.random();
                let mut cumulative = 0.0;
                let mut last = 0;
                for (i, p) in probs.iter().enumerate() {
                    if *p > 0.0 {
                        last = i;
                    }
                    cumulative += p;
                    if target < cumulative {
                        return points[i];
                    }
                }
                points[last]
            }
        }
    }
}

/// Joint law of `p` mutually independent inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpace {
    marginals: Vec<Marginal>,
}

impl InputSpace {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::config(
                "space.marginals",
                "at least one input is required",
            ));
        }
        for (i, m) in marginals.iter().enumerate() {
            if let Err((field, msg)) = m.validate() {
                return Err(Error::config(format!("space.marginals[{i}].{field}"), msg));
            }
        }
        Ok(InputSpace { marginals })
    }

    pub fn uniform_unit(p: usize) -> Self {
        InputSpace {
            marginals: vec![Marginal::uniform(0.0, 1.0); p],
        }
    }

    pub fn standard_normal(p: usize) -> Self {
        InputSpace {
            marginals: vec![Marginal::normal(0.0, 1.0); p],
        }
    }

    pub fn dims(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn variances(&self) -> Vec<f64> {
        self.marginals.iter().map(Marginal::variance).collect()
    }

    pub fn all_discrete(&self) -> bool {
        self.marginals.iter().all(Marginal::is_discrete)
    }
}

/// Draws `n` rows where column `j` follows `marginals[j]`. Row `i` only
/// consumes stream segment `(seed, stream, i)`.
pub(crate) fn sample_marginals(
    marginals: &[Marginal],
    n: usize,
    seed: u64,
    stream: u64,
) -> RowMatrix {
    let cols = marginals.len();
    let mut out = RowMatrix::zeros(n, cols);
    if cols == 0 {
        return out;
    }
    out.as_mut_slice()
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = row_rng(seed, stream, i as u64);
            for (slot, m) in row.iter_mut().zip(marginals) {
                *slot = m.sample(&mut rng);
            }
        });
    out
}

/// `n` i.i.d. draws from `space`; a pure function of `(space, n, seed)`.
pub fn sample_inputs(space: &InputSpace, n: usize, seed: u64) -> Result<RowMatrix> {
    if n == 0 {
        return Err(Error::Contract("sample size must be at least 1".into()));
    }
    Ok(sample_marginals(&space.marginals, n, seed, streams::INPUTS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_sample_is_deterministic_and_in_range() {
        let space = InputSpace::uniform_unit(2);
        let a = sample_inputs(&space, 4, 42).unwrap();
        let b = sample_inputs(&space, 4, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.nrows(), a.ncols()), (4, 2));
        assert!(a.as_slice().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn normal_moments() {
        let space = InputSpace::standard_normal(1);
        let x = sample_inputs(&space, 100_000, 1).unwrap();
        let n = x.nrows() as f64;
        let mean = x.as_slice().iter().sum::<f64>() / n;
        let var = x.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // sd(mean) = 0.0032, sd(var) = 0.0045
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn discrete_support_containment() {
        let space =
            InputSpace::new(vec![Marginal::discrete(vec![0.0, 1.0], vec![0.5, 0.5])]).unwrap();
        let x = sample_inputs(&space, 10, 3).unwrap();
        assert!(x.as_slice().iter().all(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn discrete_skips_zero_mass_points() {
        let m = Marginal::discrete(vec![0.0, 5.0, 7.0], vec![0.5, 0.5, 0.0]);
        let x = sample_marginals(&[m], 2000, 5, 0);
        assert!(x.as_slice().iter().all(|v| *v != 7.0));
    }

    #[test]
    fn columns_are_uncorrelated() {
        let space = InputSpace::new(vec![
            Marginal::uniform(0.0, 1.0),
            Marginal::normal(2.0, 3.0),
            Marginal::discrete(vec![-1.0, 1.0], vec![0.3, 0.7]),
        ])
        .unwrap();
        let x = sample_inputs(&space, 200_000, 11).unwrap();
        let cols: Vec<Vec<f64>> = (0..3).map(|j| x.column(j)).collect();
        for a in 0..3 {
            for b in (a + 1)..3 {
                let r = correlation(&cols[a], &cols[b]);
                assert!(r.abs() < 0.01, "corr({a},{b}) = {r}");
            }
        }
    }

    fn correlation(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn validation_names_parameter() {
        let err = InputSpace::new(vec![
            Marginal::uniform(0.0, 1.0),
            Marginal::discrete(vec![1.0], vec![0.9]),
        ])
        .unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "space.marginals[1].probs"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(InputSpace::new(vec![Marginal::normal(0.0, 0.0)]).is_err());
        assert!(InputSpace::new(vec![Marginal::discrete(vec![], vec![])]).is_err());
    }

    #[test]
    fn moments_of_discrete() {
        let m = Marginal::discrete(vec![0.0, 1.0], vec![0.25, 0.75]);
        assert_eq!(m.mean(), 0.75);
        assert_eq!(m.variance(), 0.1875);
    }
}
