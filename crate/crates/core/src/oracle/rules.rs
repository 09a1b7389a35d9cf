//! One-dimensional quadrature rules normalized to probability measures.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::space::Marginal;

/// Nodes and weights with `sum(weights) == 1` (up to rounding).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ProbabilityRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[g(X)]` under the rule.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * g(*x))
            .sum()
    }
}

/// Gauss-Legendre rule for the uniform law on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> ProbabilityRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        // weight on [-1, 1] is 2 / ((1 - x^2) P'(x)^2); halved for the probability measure
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    ProbabilityRule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Hermite rule for `N(mean, sd^2)` (Golub-Welsch on the
/// probabilists' Hermite recurrence).
pub fn gauss_hermite(n: usize, mean: f64, sd: f64) -> ProbabilityRule {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrize against eigen-solver noise
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    ProbabilityRule {
        nodes: pairs.iter().map(|p| mean + sd * p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    }
}

/// Quadrature rule for a marginal. Discrete laws use their own support.
pub fn rule_for(marginal: &Marginal, nodes_per_dim: usize) -> ProbabilityRule {
    match marginal {
        Marginal::Uniform { a, b } => gauss_legendre(nodes_per_dim, *a, *b),
        Marginal::Normal { mean, sd } => gauss_hermite(nodes_per_dim, *mean, *sd),
        Marginal::Discrete { points, probs } => ProbabilityRule {
            nodes: points.clone(),
            weights: probs.clone(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_moments_of_unit_uniform() {
        // E[X^j] = 1/(j+1); an n-point rule is exact through degree 2n-1
        let rule = gauss_legendre(8, 0.0, 1.0);
        for j in 0..16 {
            let m = rule.expect(|x| x.powi(j));
            assert!(
                (m - 1.0 / (j as f64 + 1.0)).abs() < 1e-14,
                "degree {j}: {m}"
            );
        }
    }

    #[test]
    fn legendre_large_rule_weights() {
        let rule = gauss_legendre(64, -1.0, 1.0);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!((rule.expect(|x| x * x) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments_of_standard_normal() {
        // E[Z^2j] = (2j-1)!!
        let rule = gauss_hermite(10, 0.0, 1.0);
        let double_factorial = [1.0, 1.0, 3.0, 15.0, 105.0, 945.0];
        for (j, df) in double_factorial.iter().enumerate() {
            let m = rule.expect(|x| x.powi(2 * j as i32));
            assert!((m - df).abs() < 1e-11 * df, "degree {}: {m}", 2 * j);
            let odd = rule.expect(|x| x.powi(2 * j as i32 + 1));
            assert!(odd.abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_shift_scale() {
        let rule = gauss_hermite(5, 2.0, 3.0);
        assert!((rule.expect(|x| x) - 2.0).abs() < 1e-13);
        assert!((rule.expect(|x| (x - 2.0).powi(2)) - 9.0).abs() < 1e-12);
    }
}
