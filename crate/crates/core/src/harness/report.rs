use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::ExperimentConfig;
use crate::error::Result;

/// One verified property with its measured value and tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// `None` when not finite.
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: value <= tolerance,
            value: finite(value),
            tolerance: finite(tolerance),
            detail: String::new(),
        }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            value: None,
            tolerance: None,
            detail: detail.into(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Experiment or suite name.
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    /// Structured per-experiment output (per-user errors, per-seed rates, ...).
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
    pub elapsed_ms: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(key.to_string(), value);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `(dotted.key, value)` rows of the JSON form; arrays use their indices.
    pub fn flatten(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        flatten_into(&serde_json::to_value(self)?, String::new(), &mut out);
        Ok(out)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["key", "value"])?;
        for (k, v) in self.flatten()? {
            w.write_record([k, v])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn flatten_into(v: &Value, prefix: String, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten_into(x, join(k), out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten_into(x, join(&i.to_string()), out);
            }
        }
        Value::String(s) => out.push((prefix, s.clone())),
        Value::Null => out.push((prefix, String::new())),
        other => out.push((prefix, other.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Writes `report` to `path`.
pub fn emit_report(report: &RunReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Csv => report.to_csv()?,
    };
    if let Some(dir) = path.as_ref().parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let mut r = RunReport {
            name: "demo".into(),
            seed: 9,
            checks: vec![
                Check::at_most("error", 1e-12, 1e-10),
                Check::flag("shape", false, "3x3"),
            ],
            details: serde_json::json!({ "users": [{ "ratio": 0.25 }] }),
            elapsed_ms: 1.5,
            ..Default::default()
        };
        r.metric("rate", 0.1 + 0.2);
        r.metric("skipped", f64::INFINITY);
        r
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let r = sample();
        assert_eq!(RunReport::from_json(&r.to_json().unwrap()).unwrap(), r);
        let empty = RunReport::default();
        assert_eq!(RunReport::from_json(&empty.to_json().unwrap()).unwrap(), empty);
    }

    #[test]
    fn csv_uses_dotted_keys() {
        let r = sample();
        assert!(!r.passed());
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("key,value\n"));
        assert!(csv.contains("checks.0.name,error\n"));
        assert!(csv.contains("details.users.0.ratio,0.25\n"));
        assert!(csv.contains("metrics.rate,0.30000000000000004\n"));
        assert!(!csv.contains("skipped"));
    }

    #[test]
    fn emit_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/report.json");
        emit_report(&sample(), ReportFormat::Json, &path).unwrap();
        let back = RunReport::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, sample());
        let bad = dir.path().join("report.json").join("x");
        std::fs::write(dir.path().join("report.json"), "").unwrap();
        assert!(emit_report(&sample(), ReportFormat::Csv, bad).is_err());
    }
}
