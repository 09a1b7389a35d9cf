//! Pick-freeze designs and estimators.
//!
//! For a subset `u`, the pair `(Y, Y^u)` is `Y = f(X)` and
//! `Y^u = f(X_u, X'_~u)`, where `X'_~u` is an independent redraw of the
//! complement. The index estimate is
//!
//! ```text
//!            sum_l [ sum_i Y_il Y^u_il        - (1/N) (sum_i (Y_il + Y^u_il)/2)^2 ]
//!   S_u,N = ---------------------------------------------------------------------
//!            sum_l [ sum_i (Y_il^2 + Y^u_il^2)/2 - (1/N) (sum_i (Y_il + Y^u_il)/2)^2 ]
//! ```
//!
//! All sums are compensated and taken in row order, so the result does not
//! depend on how many threads produced the rows.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{eval_model, ProjectionMatrix, VectorModel};
use crate::rng::{derive_seed, streams};
use crate::space::{sample_marginals, InputSpace, Marginal};
use crate::subset::SubsetIndex;
use crate::table::{trace_product, CompensatedSum, RowMatrix};
use crate::tabulated::parse_float;

/// Relative size of the denominator below which a sample counts as constant.
pub const DEGENERATE_RELATIVE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct PickFreezeDesign {
    /// `N x p` draws of `X`.
    pub x: RowMatrix,
    /// `N x (p - r)` independent draws of the complement coordinates.
    pub x_prime: RowMatrix,
    pub u: SubsetIndex,
    pub seed: u64,
}

impl PickFreezeDesign {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    /// Inputs of the frozen evaluations: `(x_u, x'_~u)` in original coordinate order.
    pub fn frozen_inputs(&self) -> RowMatrix {
        let mut out = self.x.clone();
        let complement = self.u.complement();
        for i in 0..out.nrows() {
            let row = out.row_mut(i);
            for (c, &j) in complement.iter().enumerate() {
                row[j] = self.x_prime.get(i, c);
            }
        }
        out
    }
}

/// Draws the design for `(space, u, n, seed)`. `x` and `x_prime` come from
/// disjoint stream segments of `seed`.
pub fn generate_design(
    space: &InputSpace,
    u: &SubsetIndex,
    n: usize,
    seed: u64,
) -> Result<PickFreezeDesign> {
    if n < 2 {
        return Err(Error::Contract(format!(
            "pick-freeze needs n >= 2, got {n}"
        )));
    }
    if u.dims() != space.dims() {
        return Err(Error::Contract(format!(
            "subset {} is over {} inputs but the law has {}",
            u.label(),
            u.dims(),
            space.dims()
        )));
    }
    let complement: Vec<Marginal> = u
        .complement()
        .iter()
        .map(|&j| space.marginals()[j].clone())
        .collect();
    Ok(PickFreezeDesign {
        x: sample_marginals(space.marginals(), n, seed, streams::DESIGN_X),
        x_prime: sample_marginals(&complement, n, seed, streams::DESIGN_X_PRIME),
        u: u.clone(),
        seed,
    })
}

/// Paired outputs `(Y_i, Y^u_i)`, `i = 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PickFreezeSample {
    pub y: RowMatrix,
    pub y_u: RowMatrix,
    /// Unknown for samples imported from CSV.
    pub u: Option<SubsetIndex>,
}

impl PickFreezeSample {
    pub fn new(y: RowMatrix, y_u: RowMatrix, u: Option<SubsetIndex>) -> Result<Self> {
        if y.nrows() != y_u.nrows() || y.ncols() != y_u.ncols() {
            return Err(Error::Contract(format!(
                "Y is {}x{} but Y^u is {}x{}",
                y.nrows(),
                y.ncols(),
                y_u.nrows(),
                y_u.ncols()
            )));
        }
        if y.ncols() == 0 {
            return Err(Error::Contract("samples need at least one output".into()));
        }
        Ok(PickFreezeSample { y, y_u, u })
    }

    pub fn len(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.nrows() == 0
    }

    pub fn out_dims(&self) -> usize {
        self.y.ncols()
    }

    /// Applies `O` to every `Y_i` and `Y^u_i`.
    pub fn transformed(&self, o: &DMatrix<f64>) -> Result<Self> {
        PickFreezeSample::new(
            self.y.map_rows_linear(o)?,
            self.y_u.map_rows_linear(o)?,
            self.u.clone(),
        )
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PickFreezeSample {
            y: self.y.scale(factor),
            y_u: self.y_u.scale(factor),
            u: self.u.clone(),
        }
    }

    /// Resampled pairs `(Y_idx[j], Y^u_idx[j])`.
    pub fn select(&self, idx: &[usize]) -> Self {
        let k = self.out_dims();
        let mut y = RowMatrix::zeros(idx.len(), k);
        let mut y_u = RowMatrix::zeros(idx.len(), k);
        for (j, &i) in idx.iter().enumerate() {
            y.row_mut(j).copy_from_slice(self.y.row(i));
            y_u.row_mut(j).copy_from_slice(self.y_u.row(i));
        }
        PickFreezeSample {
            y,
            y_u,
            u: self.u.clone(),
        }
    }

    fn max_abs(&self) -> f64 {
        self.y
            .as_slice()
            .iter()
            .chain(self.y_u.as_slice())
            .fold(0.0, |a: f64, v| a.max(v.abs()))
    }

    fn degenerate_floor(&self) -> f64 {
        let scale = self.max_abs();
        DEGENERATE_RELATIVE * scale * scale * self.len() as f64
    }
}

/// Evaluates `Y = f(x)` and `Y^u = f(x_u, x'_~u)`.
pub fn evaluate_pairs(model: &VectorModel, design: &PickFreezeDesign) -> Result<PickFreezeSample> {
    if model.in_dims() != design.x.ncols() {
        return Err(Error::Contract(format!(
            "model takes {} inputs, design has {}",
            model.in_dims(),
            design.x.ncols()
        )));
    }
    let y = eval_model(model, &design.x)?;
    let y_u = if design.u.is_full() {
        y.clone()
    } else {
        eval_model(model, &design.frozen_inputs())?
    };
    PickFreezeSample::new(y, y_u, Some(design.u.clone()))
}

/// Per-coordinate compensated sums over the pairs.
struct DiagonalSums {
    cross: Vec<f64>,
    squares: Vec<f64>,
    mids: Vec<f64>,
}

fn diagonal_sums(sample: &PickFreezeSample) -> DiagonalSums {
    let k = sample.out_dims();
    let mut cross = vec![CompensatedSum::default(); k];
    let mut squares = vec![CompensatedSum::default(); k];
    let mut mids = vec![CompensatedSum::default(); k];
    for i in 0..sample.len() {
        let (y, yu) = (sample.y.row(i), sample.y_u.row(i));
        for l in 0..k {
            cross[l].add(y[l] * yu[l]);
            squares[l].add(pair_mean(y[l] * y[l], yu[l] * yu[l]));
            mids[l].add(pair_mean(y[l], yu[l]));
        }
    }
    let value = |v: Vec<CompensatedSum>| v.iter().map(CompensatedSum::value).collect();
    DiagonalSums {
        cross: value(cross),
        squares: value(squares),
        mids: value(mids),
    }
}

#[inline]
fn pair_mean(a: f64, b: f64) -> f64 {
    (a + b) / 2.0
}

/// `(1/N) a b`, the centering term of every entry.
#[inline]
fn centering(a: f64, b: f64, n: f64) -> f64 {
    (a * b) / n
}

fn check_len(sample: &PickFreezeSample, min: usize) -> Result<()> {
    if sample.len() < min {
        return Err(Error::Contract(format!(
            "estimator needs at least {min} pairs, got {}",
            sample.len()
        )));
    }
    Ok(())
}

/// Numerator and denominator of the estimator, summed over coordinates in order.
pub(crate) fn estimator_terms(sample: &PickFreezeSample) -> Result<(f64, f64)> {
    check_len(sample, 2)?;
    let n = sample.len() as f64;
    let sums = diagonal_sums(sample);
    let mut num = 0.0;
    let mut den = 0.0;
    for l in 0..sample.out_dims() {
        let c = centering(sums.mids[l], sums.mids[l], n);
        num += sums.cross[l] - c;
        den += sums.squares[l] - c;
    }
    if !(num.is_finite() && den.is_finite()) {
        return Err(Error::DegenerateSample(
            "sample contains non-finite values".into(),
        ));
    }
    if !(den.abs() > sample.degenerate_floor()) {
        return Err(Error::DegenerateSample(format!(
            "denominator {den:e} is negligible; outputs are constant"
        )));
    }
    Ok((num, den))
}

/// The pick-freeze estimate `S_u,N` of the trace index with `M = Id`.
pub fn estimate_index(sample: &PickFreezeSample) -> Result<f64> {
    let (num, den) = estimator_terms(sample)?;
    Ok(num / den)
}

/// Un-normalized plug-in matrices whose traces are the estimator's
/// denominator (`sigma_hat`) and numerator (`c_u_hat`).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCovariances {
    pub sigma_hat: DMatrix<f64>,
    pub c_u_hat: DMatrix<f64>,
    pub n: usize,
}

pub fn empirical_covariances(sample: &PickFreezeSample) -> Result<EmpiricalCovariances> {
    check_len(sample, 2)?;
    let k = sample.out_dims();
    let n = sample.len() as f64;
    let mut sig = vec![CompensatedSum::default(); k * k];
    let mut cross = vec![CompensatedSum::default(); k * k];
    let mut mids = vec![CompensatedSum::default(); k];
    for i in 0..sample.len() {
        let (y, yu) = (sample.y.row(i), sample.y_u.row(i));
        for l in 0..k {
            mids[l].add(pair_mean(y[l], yu[l]));
            for m in l..k {
                sig[l * k + m].add(pair_mean(y[l] * y[m], yu[l] * yu[m]));
                if l == m {
                    cross[l * k + m].add(y[l] * yu[l]);
                } else {
                    cross[l * k + m].add(pair_mean(y[l] * yu[m], y[m] * yu[l]));
                }
            }
        }
    }
    let mids: Vec<f64> = mids.iter().map(CompensatedSum::value).collect();
    let entry = |acc: &[CompensatedSum], l: usize, m: usize| {
        let (lo, hi) = if l <= m { (l, m) } else { (m, l) };
        acc[lo * k + hi].value() - centering(mids[lo], mids[hi], n)
    };
    Ok(EmpiricalCovariances {
        sigma_hat: DMatrix::from_fn(k, k, |l, m| entry(&sig, l, m)),
        c_u_hat: DMatrix::from_fn(k, k, |l, m| entry(&cross, l, m)),
        n: sample.len(),
    })
}

/// Plug-in estimate of `S^u(M; f)`: `Tr(M c_u_hat) / Tr(M sigma_hat)`.
pub fn estimate_index_general(sample: &PickFreezeSample, m: &ProjectionMatrix) -> Result<f64> {
    if m.dims() != sample.out_dims() {
        return Err(Error::Contract(format!(
            "M is {0}x{0} but outputs are {1}-dimensional",
            m.dims(),
            sample.out_dims()
        )));
    }
    let cov = empirical_covariances(sample)?;
    let num = trace_product(m.matrix(), &cov.c_u_hat);
    let den = trace_product(m.matrix(), &cov.sigma_hat);
    let m_scale = m.matrix().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(num.is_finite() && den.is_finite()) {
        return Err(Error::DegenerateSample(
            "sample contains non-finite values".into(),
        ));
    }
    if !(den.abs() > m_scale * sample.degenerate_floor()) {
        return Err(Error::IllPosed(format!("Tr(M sigma_hat) = {den:e}")));
    }
    Ok(num / den)
}

/// Estimate for the complement `~u` from its own design.
pub fn estimate_complement(
    model: &VectorModel,
    space: &InputSpace,
    u: &SubsetIndex,
    n: usize,
    seed: u64,
) -> Result<Option<f64>> {
    let Some(complement) = u.complement_subset() else {
        return Ok(None);
    };
    let design = generate_design(space, &complement, n, derive_seed(seed, u64::MAX))?;
    estimate_index(&evaluate_pairs(model, &design)?).map(Some)
}

/// Writes the sample as CSV with header `y_1..y_k,yu_1..yu_k`.
pub fn write_sample_csv<W: Write>(sample: &PickFreezeSample, out: W) -> Result<()> {
    let k = sample.out_dims();
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (1..=k)
        .map(|l| format!("y_{l}"))
        .chain((1..=k).map(|l| format!("yu_{l}")))
        .collect();
    let csv_err = |e: csv::Error| Error::Parse(format!("csv write: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..sample.len() {
        let record: Vec<String> = sample
            .y
            .row(i)
            .iter()
            .chain(sample.y_u.row(i))
            .map(|v| format!("{v:?}"))
            .collect();
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Parse(format!("csv write: {e}")))?;
    Ok(())
}

/// Parses a `y_1..y_k,yu_1..yu_k` CSV. Never panics on malformed input.
pub fn parse_sample_csv(text: &str) -> Result<PickFreezeSample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("header: {e}")))?
        .clone();
    let width = headers.len();
    if width == 0 || width % 2 != 0 {
        return Err(Error::Parse("header must be y_1..y_k,yu_1..yu_k".into()));
    }
    let k = width / 2;
    for (i, name) in headers.iter().enumerate() {
        let expected = if i < k {
            format!("y_{}", i + 1)
        } else {
            format!("yu_{}", i - k + 1)
        };
        if name != expected {
            return Err(Error::Parse(format!(
                "header column {} is `{name}`, expected `{expected}`",
                i + 1
            )));
        }
    }
    let mut y = Vec::new();
    let mut y_u = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("data row {}: {e}", line + 1)))?;
        if record.len() != width {
            return Err(Error::Parse(format!(
                "data row {} has {} fields, expected {width}",
                line + 1,
                record.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let v = parse_float(field).ok_or_else(|| {
                Error::Parse(format!(
                    "data row {}, column {}: `{field}`",
                    line + 1,
                    j + 1
                ))
            })?;
            if j < k {
                y.push(v);
            } else {
                y_u.push(v);
            }
        }
    }
    let n = y.len() / k;
    PickFreezeSample::new(
        RowMatrix::from_vec(n, k, y)?,
        RowMatrix::from_vec(n, k, y_u)?,
        None,
    )
}

/// Writes the `2N` input rows a design needs (`x` rows, then frozen rows)
/// under header `x1..xp`, for evaluation by an external code.
pub fn write_design_inputs<W: Write>(design: &PickFreezeDesign, out: W) -> Result<()> {
    let p = design.x.ncols();
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(format!("csv write: {e}"));
    let header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(csv_err)?;
    let frozen = design.frozen_inputs();
    for row in design.x.iter_rows().chain(frozen.iter_rows()) {
        let record: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Parse(format!("csv write: {e}")))?;
    Ok(())
}
