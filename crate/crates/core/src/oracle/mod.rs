//! Exact covariance triples `(Sigma, C_u, C_~u, C_u~u)` and exact indices.
//!
//! Each oracle method computes the decomposition of the output covariance
//! induced by the Hoeffding decomposition of `f` with respect to a subset `u`:
//!
//! ```text
//!   Sigma = C_u + C_~u + C_u~u
//! ```
//!
//! and the trace index `S^u(M; f) = Tr(M C_u) / Tr(M Sigma)`. These values are
//! the reference against which the sample estimators are tested.

mod hoeffding;
pub mod rules;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use hoeffding::{
    covariances_quadrature, decompose_discrete, HoeffdingComponents, MAX_GRID_NODES,
};

use crate::error::{Error, Result};
use crate::model::{eval_model, ProjectionMatrix, VectorModel};
use crate::rng::streams;
use crate::space::{sample_marginals, InputSpace};
use crate::subset::SubsetIndex;
use crate::table::{max_abs_diff, trace_product, CompensatedSum, RowMatrix};

/// Below this, `|Tr(M Sigma)|` is treated as zero.
pub const TRACE_GUARD: f64 = 1e-12;
/// Relative eigenvalue floor for positive definiteness of `Sigma`.
pub const PD_RELATIVE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleMethod {
    ClosedForm,
    Quadrature {
        nodes_per_dim: usize,
        accuracy_warning: bool,
    },
    Enumeration,
    MonteCarlo {
        n: usize,
        seed: u64,
    },
}

impl OracleMethod {
    pub fn label(&self) -> &'static str {
        match self {
            OracleMethod::ClosedForm => "closed_form",
            OracleMethod::Quadrature { .. } => "quadrature",
            OracleMethod::Enumeration => "enumeration",
            OracleMethod::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

/// Covariances of `Y` and of its three Hoeffding components for one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTriple {
    pub sigma: DMatrix<f64>,
    pub c_u: DMatrix<f64>,
    pub c_not_u: DMatrix<f64>,
    pub c_inter: DMatrix<f64>,
    pub method: OracleMethod,
    /// Method-specific consistency residual, see each constructor.
    pub residual: f64,
}

impl CovarianceTriple {
    pub fn dims(&self) -> usize {
        self.sigma.nrows()
    }

    /// `max |Sigma - (C_u + C_~u + C_u~u)|`.
    pub fn decomposition_residual(&self) -> f64 {
        max_abs_diff(&self.sigma, &(&self.c_u + &self.c_not_u + &self.c_inter))
    }

    /// Triple of `O f` given the triple of `f`: every matrix becomes `O C O^t`.
    pub fn transformed(&self, o: &DMatrix<f64>) -> Result<Self> {
        if o.ncols() != self.dims() || !o.is_square() {
            return Err(Error::Contract(format!(
                "{}x{} transform applied to {}-dimensional outputs",
                o.nrows(),
                o.ncols(),
                self.dims()
            )));
        }
        let congruent = |c: &DMatrix<f64>| crate::table::symmetrize(&(o * c * o.transpose()));
        Ok(CovarianceTriple {
            sigma: congruent(&self.sigma),
            c_u: congruent(&self.c_u),
            c_not_u: congruent(&self.c_not_u),
            c_inter: congruent(&self.c_inter),
            method: self.method.clone(),
            residual: self.residual,
        })
    }

    /// Rejects the triple unless the smallest eigenvalue of `Sigma` exceeds
    /// `1e-10 * Tr(Sigma) / k`.
    pub fn ensure_positive_definite(&self) -> Result<()> {
        let k = self.dims();
        let trace = self.sigma.trace();
        let min_eig = SymmetricEigen::new(self.sigma.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let floor = PD_RELATIVE_FLOOR * trace / k as f64;
        if !(trace > 0.0 && min_eig > floor) {
            return Err(Error::DegenerateModel(format!(
                "output covariance matrix is not positive definite \
                 (smallest eigenvalue {min_eig:e}, trace {trace:e})"
            )));
        }
        Ok(())
    }
}

/// The three trace indices for one `(triple, M)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactIndex {
    pub s_u: f64,
    pub s_not_u: f64,
    pub s_inter: f64,
    pub m_used: ProjectionMatrix,
}

impl ExactIndex {
    /// `|s_u + s_~u + s_u~u - 1|`.
    pub fn sum_residual(&self) -> f64 {
        (self.s_u + self.s_not_u + self.s_inter - 1.0).abs()
    }
}

/// `S^u(M; f)`, `S^~u(M; f)` and `S^{u,~u}(M; f)` from a covariance triple.
pub fn exact_index(cov: &CovarianceTriple, m: &ProjectionMatrix) -> Result<ExactIndex> {
    if m.dims() != cov.dims() {
        return Err(Error::Contract(format!(
            "M is {0}x{0} but outputs are {1}-dimensional",
            m.dims(),
            cov.dims()
        )));
    }
    let denom = trace_product(m.matrix(), &cov.sigma);
    if !(denom.abs() > TRACE_GUARD) {
        return Err(Error::IllPosed(format!("Tr(M Sigma) = {denom:e}")));
    }
    Ok(ExactIndex {
        s_u: trace_product(m.matrix(), &cov.c_u) / denom,
        s_not_u: trace_product(m.matrix(), &cov.c_not_u) / denom,
        s_inter: trace_product(m.matrix(), &cov.c_inter) / denom,
        m_used: m.clone(),
    })
}

/// Closed form for `f(x) = A x`: `C_u = A_u D_u A_u^t`, `C_~u` likewise,
/// `C_u~u = 0`, `Sigma = A D A^t` with `D = diag(variances)`.
///
/// `residual` is the decomposition residual of the independently computed
/// `Sigma`.
pub fn covariances_linear(
    a: &DMatrix<f64>,
    variances: &[f64],
    u: &SubsetIndex,
) -> Result<CovarianceTriple> {
    let p = a.ncols();
    if variances.len() != p || u.dims() != p {
        return Err(Error::Contract(format!(
            "A has {p} columns, {} variances, subset over {} inputs",
            variances.len(),
            u.dims()
        )));
    }
    if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Contract(format!(
            "input variance {v} is not positive"
        )));
    }
    let k = a.nrows();
    let gram = |cols: &mut dyn Iterator<Item = usize>| {
        let mut out = DMatrix::<f64>::zeros(k, k);
        for j in cols {
            for l in 0..k {
                for m in 0..k {
                    out[(l, m)] += a[(l, j)] * a[(m, j)] * variances[j];
                }
            }
        }
        out
    };
    let sigma = gram(&mut (0..p));
    let c_u = gram(&mut u.members().iter().copied());
    let c_not_u = gram(&mut u.complement().into_iter());
    let c_inter = DMatrix::zeros(k, k);
    let mut triple = CovarianceTriple {
        sigma,
        c_u,
        c_not_u,
        c_inter,
        method: OracleMethod::ClosedForm,
        residual: 0.0,
    };
    triple.residual = triple.decomposition_residual();
    triple.ensure_positive_definite()?;
    Ok(triple)
}

/// Large-sample reference triple. Uses oracle-only random streams, so it is
/// independent of any estimator run with the same seed.
///
/// `C_u = Cov(Y, Y^u)` and `C_~u = Cov(Y, Y^~u)` (symmetrized), where `Y^u`
/// keeps `X_u` and redraws the rest. `C_u~u` is obtained by subtraction.
pub fn covariances_monte_carlo(
    model: &VectorModel,
    space: &InputSpace,
    u: &SubsetIndex,
    n: usize,
    seed: u64,
) -> Result<CovarianceTriple> {
    if n < 2 {
        return Err(Error::Contract("monte-carlo oracle needs n >= 2".into()));
    }
    let p = space.dims();
    if model.in_dims() != p || u.dims() != p {
        return Err(Error::Contract(
            "model, space and subset dimensions differ".into(),
        ));
    }
    let x = sample_marginals(space.marginals(), n, seed, streams::ORACLE_X);
    let x_alt = sample_marginals(space.marginals(), n, seed, streams::ORACLE_X_PRIME_U);
    let mut x_u = x.clone();
    let mut x_not_u = x_alt.clone();
    for i in 0..n {
        for j in u.complement() {
            x_u.row_mut(i)[j] = x_alt.get(i, j);
            x_not_u.row_mut(i)[j] = x.get(i, j);
        }
    }
    let y = eval_model(model, &x)?;
    let y_u = eval_model(model, &x_u)?;
    let y_not_u = eval_model(model, &x_not_u)?;
    let sigma = centered_cross(&y, &y);
    let c_u = crate::table::symmetrize(&centered_cross(&y, &y_u));
    let c_not_u = crate::table::symmetrize(&centered_cross(&y, &y_not_u));
    let c_inter = &sigma - &c_u - &c_not_u;
    let triple = CovarianceTriple {
        sigma,
        c_u,
        c_not_u,
        c_inter,
        method: OracleMethod::MonteCarlo { n, seed },
        residual: 0.0,
    };
    triple.ensure_positive_definite()?;
    Ok(triple)
}

/// `(1/n) sum_i (a_i - mean a)(b_i - mean b)^t` with compensated sums.
fn centered_cross(a: &RowMatrix, b: &RowMatrix) -> DMatrix<f64> {
    let n = a.nrows();
    let k = a.ncols();
    let mean = |t: &RowMatrix| -> Vec<f64> {
        (0..k)
            .map(|l| {
                let mut s = CompensatedSum::default();
                t.iter_rows().for_each(|r| s.add(r[l]));
                s.value() / n as f64
            })
            .collect()
    };
    let (ma, mb) = (mean(a), mean(b));
    let mut sums = vec![CompensatedSum::default(); k * k];
    for i in 0..n {
        let (ra, rb) = (a.row(i), b.row(i));
        for l in 0..k {
            let da = ra[l] - ma[l];
            for m in 0..k {
                sums[l * k + m].add(da * (rb[m] - mb[m]));
            }
        }
    }
    DMatrix::from_fn(k, k, |l, m| sums[l * k + m].value() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop2_triple() -> CovarianceTriple {
        let u = SubsetIndex::new(vec![0], 2).unwrap();
        covariances_linear(&DMatrix::identity(2, 2), &[1.0, 1.0], &u).unwrap()
    }

    #[test]
    fn identity_model_triple() {
        let t = prop2_triple();
        assert_eq!(t.sigma, DMatrix::identity(2, 2));
        assert_eq!(t.c_u, DMatrix::from_diagonal(&nalgebra::dvector![1.0, 0.0]));
        assert_eq!(
            t.c_not_u,
            DMatrix::from_diagonal(&nalgebra::dvector![0.0, 1.0])
        );
        assert_eq!(t.c_inter, DMatrix::zeros(2, 2));
        assert_eq!(t.residual, 0.0);
    }

    #[test]
    fn diagonal_weighting_gives_lambda_ratio() {
        let t = prop2_triple();
        for (l1, l2) in [(1.0, 1.0), (1.0, 2.0), (3.0, 5.0), (-2.0, 7.0)] {
            let idx = exact_index(&t, &ProjectionMatrix::diagonal(&[l1, l2]).unwrap()).unwrap();
            assert!((idx.s_u - l1 / (l1 + l2)).abs() < 1e-15);
        }
        let idx = exact_index(&t, &ProjectionMatrix::identity(2)).unwrap();
        assert_eq!(idx.s_u, 0.5);
    }

    #[test]
    fn scalar_case_is_classical_ratio() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, -1.0]);
        let u = SubsetIndex::new(vec![1], 3).unwrap();
        let t = covariances_linear(&a, &[1.0, 0.5, 2.0], &u).unwrap();
        let classical = t.c_u[(0, 0)] / t.sigma[(0, 0)];
        for m in [1.0, -3.0, 0.25] {
            let idx = exact_index(&t, &ProjectionMatrix::diagonal(&[m]).unwrap()).unwrap();
            assert!((idx.s_u - classical).abs() < 1e-15);
        }
    }

    #[test]
    fn full_subset() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.5, -1.0, 3.0]);
        let u = SubsetIndex::full(3).unwrap();
        let t = covariances_linear(&a, &[1.0, 2.0, 3.0], &u).unwrap();
        assert_eq!(t.c_u, t.sigma);
        assert_eq!(t.c_not_u, DMatrix::zeros(2, 2));
    }

    #[test]
    fn singular_sigma_rejected() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let u = SubsetIndex::full(1).unwrap();
        assert!(matches!(
            covariances_linear(&a, &[1.0], &u),
            Err(Error::DegenerateModel(_))
        ));
    }

    #[test]
    fn ill_posed_denominator() {
        let t = prop2_triple();
        let m = ProjectionMatrix::diagonal(&[1.0, -1.0]).unwrap();
        assert!(matches!(exact_index(&t, &m), Err(Error::IllPosed(_))));
    }

    #[test]
    fn diagonal_linear_matches_monte_carlo() {
        // entry sd of the MC estimate is at most 4*sqrt(2)/sqrt(n) ~ 0.0057
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let u = SubsetIndex::new(vec![0], 2).unwrap();
        let exact = covariances_linear(&a, &[1.0, 1.0], &u).unwrap();
        assert_eq!(
            exact.c_u,
            DMatrix::from_diagonal(&nalgebra::dvector![4.0, 0.0])
        );
        assert_eq!(
            exact.sigma,
            DMatrix::from_diagonal(&nalgebra::dvector![4.0, 1.0])
        );
        let model = VectorModel::linear(a).unwrap();
        let mc =
            covariances_monte_carlo(&model, &InputSpace::standard_normal(2), &u, 1_000_000, 77)
                .unwrap();
        assert!(max_abs_diff(&mc.c_u, &exact.c_u) < 0.03);
        assert!(max_abs_diff(&mc.sigma, &exact.sigma) < 0.03);
        assert!(max_abs_diff(&mc.c_inter, &exact.c_inter) < 0.03);
    }
}
