//! Run reports and their JSON / CSV writers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{CiMethod, ReplicationReport};
use crate::oracle::OracleMethod;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub model: String,
    pub inputs: usize,
    pub outputs: usize,
    pub n: usize,
    pub seed: u64,
    /// Weighting matrix `M`; absent when it is the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    pub subsets: Vec<SubsetRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRecord {
    /// 1-based input indices.
    pub subset: Vec<usize>,
    pub seed: u64,
    /// Pick-freeze estimate with `M = Id`.
    pub estimate: f64,
    /// Plug-in estimate with the configured `M`, when it is not the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate_general: Option<f64>,
    /// Estimate for the complementary subset, from its own design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complement_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<CiRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replication: Option<ReplicationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRecord {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub method: CiMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub method: OracleMethod,
    pub s_u: f64,
    pub s_not_u: f64,
    pub s_inter: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_u_general: Option<f64>,
    /// `|s_u + s_~u + s_u~u - 1|`.
    pub sum_residual: f64,
    /// `max |Sigma - (C_u + C_~u + C_u~u)|`.
    pub decomposition_residual: f64,
    /// `|estimate - s_u|`.
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::config(
                "format",
                format!("expected json or csv, got `{other}`"),
            )),
        }
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(field.to_string()))
    }
}

impl RunReport {
    /// Fails on the first non-finite number.
    pub fn check_finite(&self) -> Result<()> {
        for row in self.matrix.iter().flatten() {
            for v in row {
                finite("matrix", *v)?;
            }
        }
        if let Some(t) = self.elapsed_ms {
            finite("elapsed_ms", t)?;
        }
        for (i, s) in self.subsets.iter().enumerate() {
            let f = |name: &str| format!("subsets[{i}].{name}");
            finite(&f("estimate"), s.estimate)?;
            for (name, v) in [
                ("estimate_general", s.estimate_general),
                ("complement_estimate", s.complement_estimate),
                ("sigma2_hat", s.sigma2_hat),
                ("elapsed_ms", s.elapsed_ms),
            ] {
                if let Some(v) = v {
                    finite(&f(name), v)?;
                }
            }
            if let Some(ci) = &s.ci {
                finite(&f("ci.low"), ci.low)?;
                finite(&f("ci.high"), ci.high)?;
                finite(&f("ci.level"), ci.level)?;
            }
            if let Some(o) = &s.oracle {
                for (name, v) in [
                    ("oracle.s_u", o.s_u),
                    ("oracle.s_not_u", o.s_not_u),
                    ("oracle.s_inter", o.s_inter),
                    ("oracle.sum_residual", o.sum_residual),
                    ("oracle.decomposition_residual", o.decomposition_residual),
                    ("oracle.abs_error", o.abs_error),
                ] {
                    finite(&f(name), v)?;
                }
                if let Some(v) = o.s_u_general {
                    finite(&f("oracle.s_u_general"), v)?;
                }
            }
            if let Some(r) = &s.replication {
                for (name, v) in [
                    ("replication.target", r.target),
                    ("replication.mean", r.mean),
                    ("replication.std_empirical", r.std_empirical),
                    ("replication.normality_stat", r.normality_stat),
                    ("replication.coverage", r.coverage),
                ] {
                    finite(&f(name), v)?;
                }
                if let Some(v) = r.std_ratio {
                    finite(&f("replication.std_ratio"), v)?;
                }
                for v in &r.estimates {
                    finite(&f("replication.estimates"), *v)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_finite()?;
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("json encode: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("json report: {e}")))
    }

    /// Flat table `subset,estimate,oracle,sigma2_hat,ci_low,ci_high,n,seed`;
    /// absent values are empty cells.
    pub fn to_csv(&self) -> Result<String> {
        self.check_finite()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Parse(format!("csv write: {e}"));
        w.write_record([
            "subset",
            "estimate",
            "oracle",
            "sigma2_hat",
            "ci_low",
            "ci_high",
            "n",
            "seed",
        ])
        .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:?}"));
        for s in &self.subsets {
            let label: Vec<String> = s.subset.iter().map(usize::to_string).collect();
            w.write_record([
                format!("{{{}}}", label.join(",")),
                format!("{:?}", s.estimate),
                opt(s.oracle.as_ref().map(|o| o.s_u)),
                opt(s.sigma2_hat),
                opt(s.ci.as_ref().map(|c| c.low)),
                opt(s.ci.as_ref().map(|c| c.high)),
                self.n.to_string(),
                s.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Parse(format!("csv write: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Writes `report` to `path` in the requested format.
pub fn write_report(report: &RunReport, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Csv => report.to_csv()?,
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(subset: Vec<usize>, estimate: f64) -> SubsetRecord {
        SubsetRecord {
            subset,
            seed: 17,
            estimate,
            estimate_general: None,
            complement_estimate: Some(0.25),
            sigma2_hat: Some(0.7),
            ci: Some(CiRecord {
                low: estimate - 0.1,
                high: estimate + 0.1,
                level: 0.95,
                method: CiMethod::Delta,
            }),
            oracle: Some(OracleRecord {
                method: OracleMethod::ClosedForm,
                s_u: 0.5,
                s_not_u: 0.5,
                s_inter: 0.0,
                s_u_general: None,
                sum_residual: 0.0,
                decomposition_residual: 0.0,
                abs_error: (estimate - 0.5).abs(),
            }),
            replication: None,
            elapsed_ms: None,
        }
    }

    fn report() -> RunReport {
        RunReport {
            tool: "mvsens".into(),
            version: "0.1.0".into(),
            model: "identity_2".into(),
            inputs: 2,
            outputs: 2,
            n: 1000,
            seed: 3,
            matrix: None,
            subsets: vec![
                record(vec![1], 0.1 + 0.2),
                record(vec![2], 0.49),
                record(vec![1, 2], 1.0),
            ],
            elapsed_ms: Some(12.5),
        }
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        assert_eq!(RunReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn csv_rows() {
        let text = report().to_csv().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "subset,estimate,oracle,sigma2_hat,ci_low,ci_high,n,seed"
        );
        assert!(lines[3].starts_with("\"{1,2}\",1.0,0.5,0.7,"));
    }

    #[test]
    fn non_finite_rejected() {
        let mut r = report();
        r.subsets[1].sigma2_hat = Some(f64::NAN);
        match r.to_json().unwrap_err() {
            Error::NonFinite(field) => assert_eq!(field, "subsets[1].sigma2_hat"),
            e => panic!("{e:?}"),
        }
        assert!(r.to_csv().is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = write_report(
            &report(),
            Path::new("/nonexistent-dir/x/report.json"),
            ReportFormat::Json,
        );
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}
