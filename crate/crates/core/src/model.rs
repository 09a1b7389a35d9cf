//! Vector-valued models `f: R^p -> R^k`, output transforms and the built-in corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::InputSpace;
use crate::table::{mat_vec, RowMatrix};
use crate::tabulated::TabulatedModel;

const ORTHOGONALITY_TOL: f64 = 1e-10;

type EvalFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// How a model computes its outputs.
#[derive(Clone)]
pub enum ModelKind {
    /// `f(x) = A x`.
    Linear {
        a: DMatrix<f64>,
    },
    Builtin(Builtin),
    /// Pre-tabulated evaluations; only tabulated input rows can be evaluated.
    External(Arc<TabulatedModel>),
    /// `O f(x)` for an inner model and an output transform.
    Transformed {
        inner: Box<VectorModel>,
        transform: OutputTransform,
    },
    /// Caller-supplied pure function. Must be deterministic.
    Custom(Arc<EvalFn>),
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Linear { a } => f.debug_struct("Linear").field("a", a).finish(),
            ModelKind::Builtin(b) => f.debug_tuple("Builtin").field(b).finish(),
            ModelKind::External(t) => f.debug_struct("External").field("rows", &t.len()).finish(),
            ModelKind::Transformed { inner, transform } => f
                .debug_struct("Transformed")
                .field("inner", inner)
                .field("transform", transform)
                .finish(),
            ModelKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// `(x1 + x2, x1 x2)`.
    SumProd,
    /// `(s, s^2, ..., s^k)` with `s` the sum of the inputs in `members`.
    /// Depends on nothing outside `members`.
    UOnly { members: Vec<usize> },
    /// Constant output; its covariance is zero.
    Constant { values: Vec<f64> },
}

/// A deterministic map from `in_dims` inputs to `out_dims` outputs.
#[derive(Debug, Clone)]
pub struct VectorModel {
    name: String,
    in_dims: usize,
    out_dims: usize,
    kind: ModelKind,
}

impl VectorModel {
    pub fn linear(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Contract(
                "linear model needs a non-empty matrix".into(),
            ));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(
                "linear model matrix has non-finite entries".into(),
            ));
        }
        Ok(VectorModel {
            name: "linear".into(),
            in_dims: a.ncols(),
            out_dims: a.nrows(),
            kind: ModelKind::Linear { a },
        })
    }

    /// `f = Id_2`.
    pub fn identity_2() -> Self {
        VectorModel {
            name: "identity_2".into(),
            in_dims: 2,
            out_dims: 2,
            kind: ModelKind::Linear {
                a: DMatrix::identity(2, 2),
            },
        }
    }

    pub fn sum_prod() -> Self {
        VectorModel {
            name: "sum_prod".into(),
            in_dims: 2,
            out_dims: 2,
            kind: ModelKind::Builtin(Builtin::SumProd),
        }
    }

    /// Model with `out_dims` outputs depending only on the inputs in `members` (0-based).
    pub fn u_only(in_dims: usize, members: Vec<usize>, out_dims: usize) -> Result<Self> {
        crate::subset::SubsetIndex::new(members.clone(), in_dims)?;
        if out_dims == 0 {
            return Err(Error::Contract("u_only needs at least one output".into()));
        }
        Ok(VectorModel {
            name: "u_only".into(),
            in_dims,
            out_dims,
            kind: ModelKind::Builtin(Builtin::UOnly { members }),
        })
    }

    pub fn constant(in_dims: usize, values: Vec<f64>) -> Result<Self> {
        if in_dims == 0 || values.is_empty() {
            return Err(Error::Contract(
                "constant model needs inputs and outputs".into(),
            ));
        }
        Ok(VectorModel {
            name: "constant".into(),
            in_dims,
            out_dims: values.len(),
            kind: ModelKind::Builtin(Builtin::Constant { values }),
        })
    }

    pub fn external(table: TabulatedModel) -> Self {
        VectorModel {
            name: "external".into(),
            in_dims: table.in_dims(),
            out_dims: table.out_dims(),
            kind: ModelKind::External(Arc::new(table)),
        }
    }

    pub fn from_fn<F>(name: impl Into<String>, in_dims: usize, out_dims: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        VectorModel {
            name: name.into(),
            in_dims,
            out_dims,
            kind: ModelKind::Custom(Arc::new(f)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn in_dims(&self) -> usize {
        self.in_dims
    }

    pub fn out_dims(&self) -> usize {
        self.out_dims
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Input law used when a run does not specify one.
    pub fn default_space(&self) -> InputSpace {
        match &self.kind {
            ModelKind::Linear { .. } => InputSpace::standard_normal(self.in_dims),
            ModelKind::Transformed { inner, .. } => inner.default_space(),
            _ => InputSpace::uniform_unit(self.in_dims),
        }
    }

    /// Evaluates one input row into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            ModelKind::Linear { a } => mat_vec(a, x, out),
            ModelKind::Builtin(Builtin::SumProd) => {
                out[0] = x[0] + x[1];
                out[1] = x[0] * x[1];
            }
            ModelKind::Builtin(Builtin::UOnly { members }) => {
                let s: f64 = members.iter().map(|&i| x[i]).sum();
                let mut power = s;
                for o in out.iter_mut() {
                    *o = power;
                    power *= s;
                }
            }
            ModelKind::Builtin(Builtin::Constant { values }) => out.copy_from_slice(values),
            ModelKind::External(table) => out.copy_from_slice(table.lookup(x)?),
            ModelKind::Transformed { inner, transform } => {
                let mut tmp = vec![0.0; inner.out_dims];
                inner.eval_into(x, &mut tmp)?;
                transform.apply(&tmp, out);
            }
            ModelKind::Custom(f) => f(x, out),
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dims {
            return Err(Error::Contract(format!(
                "model {} takes {} inputs, got {}",
                self.name,
                self.in_dims,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.out_dims];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }
}

/// Applies `model` to every row of `inputs`. Rows are evaluated in parallel;
/// output row `i` always corresponds to input row `i`.
pub fn eval_model(model: &VectorModel, inputs: &RowMatrix) -> Result<RowMatrix> {
    if inputs.ncols() != model.in_dims {
        return Err(Error::Contract(format!(
            "model {} takes {} inputs, table has {} columns",
            model.name,
            model.in_dims,
            inputs.ncols()
        )));
    }
    let k = model.out_dims;
    let mut out = RowMatrix::zeros(inputs.nrows(), k);
    out.as_mut_slice()
        .par_chunks_mut(k)
        .enumerate()
        .try_for_each(|(i, row)| model.eval_into(inputs.row(i), row))?;
    Ok(out)
}

/// Left-composition applied to model outputs.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputTransform {
    /// Orthogonal `O` (`O^t O = Id`).
    Isometry(DMatrix<f64>),
    /// `lambda Id`, `lambda != 0`.
    Homothety(f64),
    GeneralLinear(DMatrix<f64>),
}

impl OutputTransform {
    pub fn isometry(o: DMatrix<f64>) -> Result<Self> {
        if !o.is_square() {
            return Err(Error::Contract("isometry must be square".into()));
        }
        let gram = o.transpose() * &o;
        let n = o.nrows();
        let dev = (gram - DMatrix::<f64>::identity(n, n))
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !(dev <= ORTHOGONALITY_TOL) {
            return Err(Error::Contract(format!(
                "matrix is not orthogonal: max |O^t O - Id| = {dev:e}"
            )));
        }
        Ok(OutputTransform::Isometry(o))
    }

    pub fn homothety(lambda: f64) -> Result<Self> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::Contract(
                "homothety factor must be finite and nonzero".into(),
            ));
        }
        Ok(OutputTransform::Homothety(lambda))
    }

    pub fn general_linear(o: DMatrix<f64>) -> Result<Self> {
        if !o.is_square() {
            return Err(Error::Contract("output transform must be square".into()));
        }
        Ok(OutputTransform::GeneralLinear(o))
    }

    /// `None` for a homothety, which fits any output dimension.
    pub fn dims(&self) -> Option<usize> {
        match self {
            OutputTransform::Isometry(o) | OutputTransform::GeneralLinear(o) => Some(o.nrows()),
            OutputTransform::Homothety(_) => None,
        }
    }

    /// The transform as a `k x k` matrix.
    pub fn matrix(&self, k: usize) -> DMatrix<f64> {
        match self {
            OutputTransform::Isometry(o) | OutputTransform::GeneralLinear(o) => o.clone(),
            OutputTransform::Homothety(l) => DMatrix::identity(k, k) * *l,
        }
    }

    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        match self {
            OutputTransform::Isometry(o) | OutputTransform::GeneralLinear(o) => mat_vec(o, y, out),
            OutputTransform::Homothety(l) => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = l * v;
                }
            }
        }
    }
}

/// The model `x -> t(f(x))`.
pub fn apply_transform(model: &VectorModel, t: &OutputTransform) -> Result<VectorModel> {
    if let Some(d) = t.dims() {
        if d != model.out_dims {
            return Err(Error::Contract(format!(
                "transform is {d}x{d} but model {} has {} outputs",
                model.name, model.out_dims
            )));
        }
    }
    Ok(VectorModel {
        name: model.name.clone(),
        in_dims: model.in_dims,
        out_dims: model.out_dims,
        kind: ModelKind::Transformed {
            inner: Box::new(model.clone()),
            transform: t.clone(),
        },
    })
}

/// Weighting matrix `M` of the trace index `Tr(M C_u) / Tr(M Sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix(DMatrix<f64>);

impl ProjectionMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Contract(format!(
                "projection matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(
                "projection matrix has non-finite entries".into(),
            ));
        }
        Ok(ProjectionMatrix(m))
    }

    pub fn identity(k: usize) -> Self {
        ProjectionMatrix(DMatrix::identity(k, k))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        ProjectionMatrix::new(DMatrix::from_diagonal(
            &nalgebra::DVector::from_column_slice(values),
        ))
    }

    pub fn dims(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0 == DMatrix::identity(self.dims(), self.dims())
    }

    /// `O^t M O`.
    pub fn congruence(&self, o: &DMatrix<f64>) -> Result<Self> {
        if o.nrows() != self.dims() || !o.is_square() {
            return Err(Error::Contract(
                "transform dimension does not match M".into(),
            ));
        }
        ProjectionMatrix::new(o.transpose() * &self.0 * o)
    }
}

/// Parameter values accepted by corpus constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

pub type ModelParams = BTreeMap<String, ParamValue>;

/// Names accepted by [`corpus_model`].
pub const CORPUS_NAMES: &[&str] = &["identity_2", "linear", "sum_prod", "u_only", "constant"];

/// Builds a corpus model by name. Parameters:
///
/// * `identity_2`, `sum_prod`: none.
/// * `linear`: `a` (matrix, `k x p`).
/// * `u_only`: `inputs` (p), `subset` (1-based indices), `outputs` (k, default 1).
/// * `constant`: `inputs` (p), `values` (output vector).
///
/// Errors are configuration errors naming `model.name` or `model.params.<key>`.
pub fn corpus_model(name: &str, params: &ModelParams) -> Result<VectorModel> {
    let allowed: &[&str] = match name {
        "identity_2" | "sum_prod" => &[],
        "linear" => &["a"],
        "u_only" => &["inputs", "subset", "outputs"],
        "constant" => &["inputs", "values"],
        other => {
            return Err(Error::config(
                "model.name",
                format!("unknown model `{other}`; expected one of {CORPUS_NAMES:?}"),
            ))
        }
    };
    if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::config(
            format!("model.params.{extra}"),
            format!("model `{name}` takes no parameter `{extra}`"),
        ));
    }
    let field = |key: &str| format!("model.params.{key}");
    match name {
        "identity_2" => Ok(VectorModel::identity_2()),
        "sum_prod" => Ok(VectorModel::sum_prod()),
        "linear" => {
            let rows = match params.get("a") {
                Some(ParamValue::Matrix(rows)) => rows,
                Some(_) => return Err(Error::config(field("a"), "expected a matrix")),
                None => return Err(Error::config(field("a"), "missing")),
            };
            let a = crate::table::from_nested(rows)
                .map_err(|e| Error::config(field("a"), e.to_string()))?;
            VectorModel::linear(a).map_err(|e| Error::config(field("a"), e.to_string()))
        }
        "u_only" => {
            let p = count_param(params, "inputs")?;
            let k = match params.get("outputs") {
                None => 1,
                Some(_) => count_param(params, "outputs")?,
            };
            let members = index_list(params, "subset")?;
            let u = crate::subset::SubsetIndex::from_one_based(&members, p)
                .map_err(|e| Error::config(field("subset"), e.to_string()))?;
            VectorModel::u_only(p, u.members().to_vec(), k)
                .map_err(|e| Error::config(field("subset"), e.to_string()))
        }
        "constant" => {
            let p = count_param(params, "inputs")?;
            let values = match params.get("values") {
                Some(ParamValue::Vector(v)) => v.clone(),
                Some(ParamValue::Number(v)) => vec![*v],
                Some(_) => return Err(Error::config(field("values"), "expected a vector")),
                None => return Err(Error::config(field("values"), "missing")),
            };
            if values.iter().any(|v| !v.is_finite()) || values.len() > MAX_DIMS {
                return Err(Error::config(field("values"), "values must be finite"));
            }
            VectorModel::constant(p, values)
                .map_err(|e| Error::config(field("values"), e.to_string()))
        }
        _ => unreachable!(),
    }
}

/// Upper bound on input or output dimension accepted from configuration.
pub const MAX_DIMS: usize = 4096;

fn count_param(params: &ModelParams, key: &str) -> Result<usize> {
    let field = format!("model.params.{key}");
    match params.get(key) {
        Some(ParamValue::Number(v)) if v.fract() == 0.0 && *v >= 1.0 && *v <= MAX_DIMS as f64 => {
            Ok(*v as usize)
        }
        Some(_) => Err(Error::config(
            field,
            format!("expected an integer in 1..={MAX_DIMS}"),
        )),
        None => Err(Error::config(field, "missing")),
    }
}

fn index_list(params: &ModelParams, key: &str) -> Result<Vec<usize>> {
    let field = format!("model.params.{key}");
    let values = match params.get(key) {
        Some(ParamValue::Vector(v)) => v.clone(),
        Some(ParamValue::Number(v)) => vec![*v],
        Some(_) => return Err(Error::config(field, "expected a list of indices")),
        None => return Err(Error::config(field, "missing")),
    };
    values
        .iter()
        .map(|v| {
            if v.fract() == 0.0 && *v >= 1.0 && *v <= MAX_DIMS as f64 {
                Ok(*v as usize)
            } else {
                Err(Error::config(
                    field.clone(),
                    format!("{v} is not a 1-based index"),
                ))
            }
        })
        .collect()
}
