//! Run configuration: a schema-versioned TOML document.
//!
//! ```toml
//! schema = 1
//! n = 100000
//! seed = 1
//! subsets = [[1], [2]]          # 1-based input indices
//! oracle = "auto"               # or "none"
//! replications = 500            # optional
//! matrix = [[1.0, 0.0], [0.0, 2.0]]   # optional weighting M, default identity
//!
//! [model]
//! name = "identity_2"           # corpus entry, or: external = "table.csv"
//! params = {}
//! transform = { kind = "isometry", matrix = [[0.0, 1.0], [1.0, 0.0]] }
//!
//! [space]
//! marginals = [{ kind = "normal", mean = 0.0, sd = 1.0 }, { kind = "normal", mean = 0.0, sd = 1.0 }]
//!
//! [ci]
//! method = "bootstrap"          # none | delta | bootstrap
//! level = 0.95
//! b_reps = 1000
//! ```

use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{IntervalSpec, MIN_BOOTSTRAP_REPS, MIN_REPLICATIONS};
use crate::model::{
    corpus_model, ModelParams, OutputTransform, ProjectionMatrix, VectorModel, MAX_DIMS,
};
use crate::space::{InputSpace, Marginal};
use crate::subset::SubsetIndex;
use crate::table::from_nested;
use crate::tabulated::parse_float;

pub const SCHEMA_VERSION: i64 = 1;
pub const MAX_N: usize = 100_000_000;
pub const MAX_REPLICATIONS: usize = 100_000;
pub const MAX_BOOTSTRAP_REPS: usize = 1_000_000;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_BOOTSTRAP_REPS: usize = 1000;

/// The document as written, before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema: Option<i64>,
    pub model: Option<RawModel>,
    pub space: Option<RawSpace>,
    pub subsets: Option<Vec<Vec<i64>>>,
    pub n: Option<i64>,
    pub seed: Option<i64>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub ci: Option<RawCi>,
    pub oracle: Option<String>,
    pub replications: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub name: Option<String>,
    #[serde(default)]
    pub params: ModelParams,
    pub external: Option<PathBuf>,
    pub transform: Option<RawTransform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTransform {
    pub kind: String,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpace {
    pub marginals: Vec<Marginal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCi {
    pub method: String,
    pub level: Option<f64>,
    pub b_reps: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Corpus { name: String, params: ModelParams },
    External { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    None,
    Auto,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: ModelSource,
    /// Resolved model; `None` for external models until loaded.
    pub model: Option<VectorModel>,
    pub transform: Option<OutputTransform>,
    pub space: InputSpace,
    pub subsets: Vec<SubsetIndex>,
    pub n: usize,
    pub seed: u64,
    pub matrix: ProjectionMatrix,
    pub ci: Option<IntervalSpec>,
    pub oracle: OracleMode,
    pub replications: Option<usize>,
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::config("document", e.message().to_string()))?;
    validate(raw)
}

fn count(value: i64, field: &str, min: usize, max: usize) -> Result<usize> {
    usize::try_from(value)
        .ok()
        .filter(|v| (min..=max).contains(v))
        .ok_or_else(|| {
            Error::config(
                field,
                format!("expected an integer in {min}..={max}, got {value}"),
            )
        })
}

fn matrix_field(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows.len() > MAX_DIMS {
        return Err(Error::config(
            field,
            "matrix must have between 1 and 4096 rows",
        ));
    }
    let m = from_nested(rows).map_err(|e| Error::config(field, e.to_string()))?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::config(field, "matrix entries must be finite"));
    }
    Ok(m)
}

/// Validates a raw document; errors name the offending field.
pub fn validate(raw: RawConfig) -> Result<RunConfig> {
    match raw.schema {
        Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::config(
                "schema",
                format!("unsupported schema version {v}"),
            ))
        }
        None => {
            return Err(Error::config(
                "schema",
                format!("missing; expected `schema = {SCHEMA_VERSION}`"),
            ))
        }
    }
    let raw_model = raw.model.ok_or_else(|| Error::config("model", "missing"))?;
    let (source, model) = match (&raw_model.name, &raw_model.external) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "model",
                "give either `name` or `external`, not both",
            ))
        }
        (None, None) => return Err(Error::config("model.name", "missing")),
        (Some(name), None) => {
            let model = corpus_model(name, &raw_model.params)?;
            (
                ModelSource::Corpus {
                    name: name.clone(),
                    params: raw_model.params.clone(),
                },
                Some(model),
            )
        }
        (None, Some(path)) => {
            if !raw_model.params.is_empty() {
                return Err(Error::config(
                    "model.params",
                    "external models take no parameters",
                ));
            }
            (ModelSource::External { path: path.clone() }, None)
        }
    };

    let space = match raw.space {
        Some(s) => {
            if s.marginals.len() > MAX_DIMS {
                return Err(Error::config("space.marginals", "too many inputs"));
            }
            InputSpace::new(s.marginals)?
        }
        None => match &model {
            Some(m) => m.default_space(),
            None => {
                return Err(Error::config(
                    "space",
                    "external models need an explicit input law",
                ))
            }
        },
    };
    let p = space.dims();
    if let Some(m) = &model {
        if m.in_dims() != p {
            return Err(Error::config(
                "space.marginals",
                format!(
                    "model takes {} inputs but {p} marginals are given",
                    m.in_dims()
                ),
            ));
        }
    }
    let k = model.as_ref().map(VectorModel::out_dims);

    let transform = match raw_model.transform {
        None => None,
        Some(t) => Some(validate_transform(&t, k)?),
    };

    let raw_subsets = raw
        .subsets
        .ok_or_else(|| Error::config("subsets", "missing"))?;
    if raw_subsets.is_empty() {
        return Err(Error::config("subsets", "at least one subset is required"));
    }
    let subsets = raw_subsets
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let field = format!("subsets[{i}]");
            let idx: Vec<usize> = s
                .iter()
                .map(|&v| {
                    usize::try_from(v).map_err(|_| {
                        Error::config(field.clone(), format!("{v} is not a 1-based index"))
                    })
                })
                .collect::<Result<_>>()?;
            SubsetIndex::from_one_based(&idx, p).map_err(|e| Error::config(field, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = count(
        raw.n.ok_or_else(|| Error::config("n", "missing"))?,
        "n",
        2,
        MAX_N,
    )?;
    let seed = raw
        .seed
        .map(|s| u64::try_from(s).map_err(|_| Error::config("seed", "seed must be non-negative")))
        .transpose()?
        .unwrap_or(0);

    let matrix = match raw.matrix {
        None => None,
        Some(rows) => {
            let m = matrix_field(&rows, "matrix")?;
            if !m.is_square() {
                return Err(Error::config(
                    "matrix",
                    format!("M must be square, got {}x{}", m.nrows(), m.ncols()),
                ));
            }
            if let Some(k) = k {
                if m.nrows() != k {
                    return Err(Error::config(
                        "matrix",
                        format!("M is {0}x{0} but the model has {k} outputs", m.nrows()),
                    ));
                }
            }
            Some(ProjectionMatrix::new(m).map_err(|e| Error::config("matrix", e.to_string()))?)
        }
    };
    let matrix = match (matrix, k) {
        (Some(m), _) => m,
        (None, Some(k)) => ProjectionMatrix::identity(k),
        // resolved once the external table is loaded
        (None, None) => ProjectionMatrix::identity(1),
    };

    let ci = match raw.ci {
        None => None,
        Some(c) => validate_ci(&c)?,
    };

    let oracle = match raw.oracle.as_deref() {
        None | Some("auto") => OracleMode::Auto,
        Some("none") => OracleMode::None,
        Some(other) => {
            return Err(Error::config(
                "oracle",
                format!("expected `auto` or `none`, got `{other}`"),
            ))
        }
    };

    let replications = raw
        .replications
        .map(|r| count(r, "replications", MIN_REPLICATIONS, MAX_REPLICATIONS))
        .transpose()?;

    Ok(RunConfig {
        source,
        model,
        transform,
        space,
        subsets,
        n,
        seed,
        matrix,
        ci,
        oracle,
        replications,
    })
}

fn validate_transform(t: &RawTransform, k: Option<usize>) -> Result<OutputTransform> {
    let field = "model.transform";
    let matrix = || -> Result<DMatrix<f64>> {
        let rows = t
            .matrix
            .as_ref()
            .ok_or_else(|| Error::config(format!("{field}.matrix"), "missing"))?;
        let m = matrix_field(rows, &format!("{field}.matrix"))?;
        if let Some(k) = k {
            if m.nrows() != k || m.ncols() != k {
                return Err(Error::config(
                    format!("{field}.matrix"),
                    format!("expected {k}x{k}, got {}x{}", m.nrows(), m.ncols()),
                ));
            }
        }
        Ok(m)
    };
    let reject = |key: &str, present: bool| -> Result<()> {
        if present {
            Err(Error::config(
                format!("{field}.{key}"),
                format!("not used by `{}` transforms", t.kind),
            ))
        } else {
            Ok(())
        }
    };
    match t.kind.as_str() {
        "isometry" => {
            reject("factor", t.factor.is_some())?;
            OutputTransform::isometry(matrix()?)
                .map_err(|e| Error::config(format!("{field}.matrix"), e.to_string()))
        }
        "general_linear" => {
            reject("factor", t.factor.is_some())?;
            OutputTransform::general_linear(matrix()?)
                .map_err(|e| Error::config(format!("{field}.matrix"), e.to_string()))
        }
        "homothety" => {
            reject("matrix", t.matrix.is_some())?;
            let f = t
                .factor
                .ok_or_else(|| Error::config(format!("{field}.factor"), "missing"))?;
            OutputTransform::homothety(f)
                .map_err(|e| Error::config(format!("{field}.factor"), e.to_string()))
        }
        other => Err(Error::config(
            format!("{field}.kind"),
            format!("expected isometry, homothety or general_linear, got `{other}`"),
        )),
    }
}

fn validate_ci(c: &RawCi) -> Result<Option<IntervalSpec>> {
    let level = c.level.unwrap_or(DEFAULT_LEVEL);
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(
            "ci.level",
            format!("{level} is not in (0, 1)"),
        ));
    }
    match c.method.as_str() {
        "none" => Ok(None),
        "delta" => {
            if c.b_reps.is_some() {
                return Err(Error::config("ci.b_reps", "only used by the bootstrap"));
            }
            Ok(Some(IntervalSpec::Delta { level }))
        }
        "bootstrap" => {
            let b_reps = match c.b_reps {
                None => DEFAULT_BOOTSTRAP_REPS,
                Some(b) => count(b, "ci.b_reps", MIN_BOOTSTRAP_REPS, MAX_BOOTSTRAP_REPS)?,
            };
            Ok(Some(IntervalSpec::Bootstrap { b_reps, level }))
        }
        other => Err(Error::config(
            "ci.method",
            format!("expected none, delta or bootstrap, got `{other}`"),
        )),
    }
}

/// Parses a matrix file: one row per line, whitespace-separated decimal
/// numbers. Blank lines and lines starting with `#` are skipped.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                parse_float(tok)
                    .ok_or_else(|| Error::Parse(format!("line {}: `{tok}` is not a number", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        if row.len() > MAX_DIMS || rows.len() >= MAX_DIMS {
            return Err(Error::Parse(format!(
                "matrix exceeds {MAX_DIMS} rows or columns"
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("matrix file has no rows".into()));
    }
    from_nested(&rows)
}
