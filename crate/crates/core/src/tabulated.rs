//! Externally evaluated models supplied as CSV tables with header
//! `x1,...,xp,y1,...,yk`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::table::RowMatrix;

#[derive(Debug, Clone)]
pub struct TabulatedModel {
    inputs: RowMatrix,
    outputs: RowMatrix,
    index: HashMap<Vec<u64>, usize>,
}

fn key(x: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 are the same input
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl TabulatedModel {
    pub fn new(inputs: RowMatrix, outputs: RowMatrix) -> Result<Self> {
        if inputs.nrows() != outputs.nrows() {
            return Err(Error::Contract("input and output row counts differ".into()));
        }
        if inputs.ncols() == 0 || outputs.ncols() == 0 {
            return Err(Error::Contract(
                "tabulated model needs inputs and outputs".into(),
            ));
        }
        let mut index = HashMap::with_capacity(inputs.nrows());
        for i in 0..inputs.nrows() {
            if let Some(&prev) = index.get(&key(inputs.row(i))) {
                let prev: usize = prev;
                if outputs.row(prev) != outputs.row(i) {
                    return Err(Error::Parse(format!(
                        "data rows {} and {} share inputs but differ in outputs",
                        prev + 1,
                        i + 1
                    )));
                }
                continue;
            }
            index.insert(key(inputs.row(i)), i);
        }
        Ok(TabulatedModel {
            inputs,
            outputs,
            index,
        })
    }

    pub fn in_dims(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn out_dims(&self) -> usize {
        self.outputs.ncols()
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn lookup(&self, x: &[f64]) -> Result<&[f64]> {
        self.index
            .get(&key(x))
            .map(|&i| self.outputs.row(i))
            .ok_or_else(|| Error::Evaluation(format!("input {x:?} is not tabulated")))
    }
}

/// Parses the `x1..xp,y1..yk` CSV format. Never panics on malformed input.
pub fn parse_tabulated_model(text: &str) -> Result<TabulatedModel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("header: {e}")))?
        .clone();
    let (p, k) = split_header(headers.iter())?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("data row {}: {e}", line + 1)))?;
        if record.len() != p + k {
            return Err(Error::Parse(format!(
                "data row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                p + k
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
            if j < p {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let n = xs.len() / p;
    if n == 0 {
        return Err(Error::Parse("no data rows".into()));
    }
    TabulatedModel::new(
        RowMatrix::from_vec(n, p, xs)?,
        RowMatrix::from_vec(n, k, ys)?,
    )
}

/// Finite decimal float. Rejects `inf`, `nan` and hex forms.
pub(crate) fn parse_float(field: &str) -> Option<f64> {
    if field.is_empty()
        || !field
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
    {
        return None;
    }
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn split_header<'a>(names: impl Iterator<Item = &'a str>) -> Result<(usize, usize)> {
    let names: Vec<&str> = names.collect();
    let p = names.iter().take_while(|n| n.starts_with('x')).count();
    let k = names.len() - p;
    if p == 0 || k == 0 {
        return Err(Error::Parse("header must be x1,...,xp,y1,...,yk".into()));
    }
    for (i, name) in names.iter().enumerate() {
        let expected = if i < p {
            format!("x{}", i + 1)
        } else {
            format!("y{}", i - p + 1)
        };
        if *name != expected {
            return Err(Error::Parse(format!(
                "header column {} is `{name}`, expected `{expected}`",
                i + 1
            )));
        }
    }
    Ok((p, k))
}
