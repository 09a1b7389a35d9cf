//! Orchestration of a configured run: oracle, design, estimation, intervals.

use std::fs;
use std::time::Instant;

use crate::config::{ModelSource, OracleMode, RunConfig};
use crate::error::{Error, Result};
use crate::inference::{delta_variance, replication_study, IntervalSpec, MIN_DELTA_PAIRS};
use crate::model::{apply_transform, Builtin, ModelKind, ProjectionMatrix, VectorModel};
use crate::oracle::{
    covariances_linear, covariances_monte_carlo, covariances_quadrature, decompose_discrete,
    exact_index, CovarianceTriple, MAX_GRID_NODES,
};
use crate::pickfreeze::{
    estimate_complement, estimate_index, estimate_index_general, evaluate_pairs, generate_design,
};
use crate::report::{CiRecord, OracleRecord, RunReport, SubsetRecord};
use crate::rng::derive_seed;
use crate::space::InputSpace;
use crate::subset::SubsetIndex;
use crate::tabulated::parse_tabulated_model;

/// Quadrature nodes per input used by the automatic oracle.
pub const AUTO_QUADRATURE_NODES: usize = 48;
/// Largest input dimension for which the automatic oracle uses quadrature.
pub const AUTO_QUADRATURE_MAX_DIMS: usize = 3;
pub const AUTO_MONTE_CARLO_N: usize = 1_000_000;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Omit timing fields so repeated runs give byte-identical reports.
    pub reproducible: bool,
}

/// The model a config refers to, with its output transform applied.
pub fn resolve_model(config: &RunConfig) -> Result<VectorModel> {
    let base = match (&config.model, &config.source) {
        (Some(m), _) => m.clone(),
        (None, ModelSource::External { path }) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let table = parse_tabulated_model(&text)?;
            VectorModel::external(table)
        }
        (None, ModelSource::Corpus { name, params }) => crate::model::corpus_model(name, params)?,
    };
    if base.in_dims() != config.space.dims() {
        return Err(Error::config(
            "space.marginals",
            format!(
                "model takes {} inputs but {} marginals are given",
                base.in_dims(),
                config.space.dims()
            ),
        ));
    }
    match &config.transform {
        None => Ok(base),
        Some(t) => {
            apply_transform(&base, t).map_err(|e| Error::config("model.transform", e.to_string()))
        }
    }
}

/// Exact or reference covariance triple when the model family admits one.
///
/// Linear models use the closed form, transformed models the congruence
/// rule, all-discrete inputs exact enumeration, small continuous problems
/// tensor quadrature and the rest a large Monte-Carlo run. Tabulated and
/// caller-supplied models have no oracle.
pub fn auto_oracle(
    model: &VectorModel,
    space: &InputSpace,
    u: &SubsetIndex,
) -> Result<Option<CovarianceTriple>> {
    let triple = match model.kind() {
        ModelKind::Linear { a } => covariances_linear(a, &space.variances(), u)?,
        ModelKind::Transformed { inner, transform } => {
            let Some(inner) = auto_oracle(inner, space, u)? else {
                return Ok(None);
            };
            let t = inner.transformed(&transform.matrix(model.out_dims()))?;
            t.ensure_positive_definite()?;
            t
        }
        ModelKind::External(_) | ModelKind::Custom(_) => return Ok(None),
        ModelKind::Builtin(b) => {
            if let Builtin::Constant { .. } = b {
                return Err(Error::DegenerateModel(
                    "constant model: the covariance matrix of Y must be positive definite".into(),
                ));
            }
            let grid: Option<usize> = space
                .marginals()
                .iter()
                .map(|m| match m {
                    crate::space::Marginal::Discrete { points, .. } => Some(points.len()),
                    _ => None,
                })
                .try_fold(1usize, |acc, s| s.and_then(|s| acc.checked_mul(s)));
            match grid {
                Some(g) if g <= MAX_GRID_NODES => {
                    let t = decompose_discrete(model, space, u)?.covariances();
                    t.ensure_positive_definite()?;
                    t
                }
                _ if space.dims() <= AUTO_QUADRATURE_MAX_DIMS => {
                    covariances_quadrature(model, space, u, AUTO_QUADRATURE_NODES)?
                }
                _ => covariances_monte_carlo(model, space, u, AUTO_MONTE_CARLO_N, 0)?,
            }
        }
    };
    Ok(Some(triple))
}

fn is_tabulated(model: &VectorModel) -> bool {
    match model.kind() {
        ModelKind::External(_) => true,
        ModelKind::Transformed { inner, .. } => is_tabulated(inner),
        _ => false,
    }
}

/// Runs every configured subset and assembles the report.
pub fn run(config: &RunConfig, options: RunOptions) -> Result<RunReport> {
    let started = Instant::now();
    let model = resolve_model(config)?;
    let k = model.out_dims();
    let matrix = if config.model.is_none() && config.matrix.is_identity() {
        ProjectionMatrix::identity(k)
    } else {
        config.matrix.clone()
    };
    if matrix.dims() != k {
        return Err(Error::config(
            "matrix",
            format!("M is {0}x{0} but the model has {k} outputs", matrix.dims()),
        ));
    }
    let general = !matrix.is_identity();
    let degenerate = |e: Error| match e {
        Error::DegenerateModel(msg) | Error::DegenerateSample(msg) => Error::DegenerateModel(
            format!("{msg}; the covariance matrix of Y must be positive definite"),
        ),
        other => other,
    };

    let mut records = Vec::with_capacity(config.subsets.len());
    for (j, u) in config.subsets.iter().enumerate() {
        let sub_started = Instant::now();
        let seed = derive_seed(config.seed, j as u64);

        let triple = match config.oracle {
            OracleMode::None => None,
            OracleMode::Auto => auto_oracle(&model, &config.space, u).map_err(degenerate)?,
        };

        let design = generate_design(&config.space, u, config.n, seed)?;
        let sample = evaluate_pairs(&model, &design)?;
        let estimate = estimate_index(&sample).map_err(degenerate)?;
        let estimate_general = if general {
            Some(estimate_index_general(&sample, &matrix)?)
        } else {
            None
        };
        // A tabulated model only answers the rows of the exported design.
        let complement_estimate = if is_tabulated(&model) {
            None
        } else {
            estimate_complement(&model, &config.space, u, config.n, seed).map_err(degenerate)?
        };

        let interval = match config.ci {
            Some(spec) => Some(spec.build(&sample, derive_seed(seed, 1))?),
            None => None,
        };
        let sigma2_hat = match &interval {
            Some(e) => Some(e.sigma2_hat),
            None if sample.len() >= MIN_DELTA_PAIRS => Some(delta_variance(&sample)?),
            None => None,
        };

        let oracle = match &triple {
            None => None,
            Some(t) => {
                let id = exact_index(t, &ProjectionMatrix::identity(k))?;
                let s_u_general = if general {
                    Some(exact_index(t, &matrix)?.s_u)
                } else {
                    None
                };
                Some(OracleRecord {
                    method: t.method.clone(),
                    s_u: id.s_u,
                    s_not_u: id.s_not_u,
                    s_inter: id.s_inter,
                    s_u_general,
                    sum_residual: id.sum_residual(),
                    decomposition_residual: t.decomposition_residual(),
                    abs_error: (estimate - id.s_u).abs(),
                })
            }
        };

        let replication = match config.replications {
            None => None,
            Some(reps) => {
                let target = oracle.as_ref().map_or(estimate, |o| o.s_u);
                let spec = config.ci.unwrap_or(IntervalSpec::Delta { level: 0.95 });
                Some(replication_study(
                    &model,
                    &config.space,
                    u,
                    config.n,
                    reps,
                    target,
                    spec,
                    derive_seed(seed, 2),
                )?)
            }
        };

        records.push(SubsetRecord {
            subset: u.one_based(),
            seed,
            estimate,
            estimate_general,
            complement_estimate,
            sigma2_hat,
            ci: interval.map(|e| CiRecord {
                low: e.ci_low,
                high: e.ci_high,
                level: e.ci_level,
                method: e.method,
            }),
            oracle,
            replication,
            elapsed_ms: (!options.reproducible).then(|| sub_started.elapsed().as_secs_f64() * 1e3),
        });
    }

    Ok(RunReport {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        model: model.name().to_string(),
        inputs: model.in_dims(),
        outputs: k,
        n: config.n,
        seed: config.seed,
        matrix: general.then(|| crate::table::to_nested(matrix.matrix())),
        subsets: records,
        elapsed_ms: (!options.reproducible).then(|| started.elapsed().as_secs_f64() * 1e3),
    })
}
