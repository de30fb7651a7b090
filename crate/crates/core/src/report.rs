//! Versioned JSON reports and CSV curve extraction.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::opt::{Manifest, OverheadLedger, RuleClass};

pub const FORMAT_VERSION: &str = "1";

/// The published report schema.
pub const SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// A well-defined benchmark run under its rules.
    Benchmark,
    /// A protocol sensitive to specific errors or circuit structures.
    Diagnostic,
    /// Contains an output-based optimization; not a benchmark result.
    GamingDemo,
}

/// A table of rows for external plotting.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Series {
    pub fn new(columns: &[&str]) -> Self {
        Series {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkReport {
    pub format_version: String,
    pub benchmark: String,
    pub status: Status,
    pub config: Value,
    pub seed: u64,
    pub metrics: Value,
    pub optimizations: Manifest,
    pub overhead: OverheadLedger,
    pub timestamp: String,
}

impl BenchmarkReport {
    /// A report stamped with the current UTC time. `status` is the
    /// benchmark's own verdict; a rule-3 technique in the manifest overrides
    /// it with `gaming-demo`.
    pub fn new(
        benchmark: &str,
        status: Status,
        config: Value,
        seed: u64,
        metrics: Value,
        optimizations: Manifest,
        overhead: OverheadLedger,
    ) -> Self {
        BenchmarkReport {
            format_version: FORMAT_VERSION.to_string(),
            benchmark: benchmark.to_string(),
            status: optimizations.status(status),
            config,
            seed,
            metrics,
            optimizations,
            overhead,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        validate_report(&self.to_value())
    }
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("schema is valid JSON");
        jsonschema::validator_for(&schema).expect("schema compiles")
    })
}

/// Check a report against the schema and the status rules.
pub fn validate_report(report: &Value) -> Result<()> {
    let errors: Vec<String> = validator()
        .iter_errors(report)
        .map(|e| format!("{}: {}", e.instance_path(), e))
        .collect();
    if !errors.is_empty() {
        return Err(Error::InvalidReport(errors.join("; ")));
    }
    let parsed: BenchmarkReport = serde_json::from_value(report.clone())?;
    if parsed.optimizations.contains(RuleClass::Rule3Forbidden) && parsed.status != Status::GamingDemo {
        return Err(Error::InvalidReport("rule-3 technique present but status is not gaming-demo".into()));
    }
    Ok(())
}

/// All series of a report payload as `(name, csv)`, sorted by name.
pub fn emit_curves(report: &Value) -> Result<Vec<(String, String)>> {
    let series = report
        .get("metrics")
        .and_then(|m| m.get("series"))
        .ok_or_else(|| Error::InvalidReport("report has no series".into()))?;
    let series: BTreeMap<String, Series> = serde_json::from_value(series.clone())?;
    if series.is_empty() {
        return Err(Error::InvalidReport("report has no series".into()));
    }
    series
        .into_iter()
        .map(|(name, s)| Ok((name, s.to_csv()?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::Pipeline;
    use serde_json::json;

    fn sample(pipeline: &str, status: Status) -> BenchmarkReport {
        let mut s = Series::new(&["x", "y"]);
        s.push(vec![json!(1), json!(0.5)]);
        let manifest = pipeline.parse::<Pipeline>().unwrap().manifest();
        BenchmarkReport::new(
            "qv",
            status,
            json!({"width": 3}),
            7,
            json!({"series": {"curve": s}}),
            manifest,
            OverheadLedger::new(),
        )
    }

    #[test]
    fn reports_validate() {
        sample("layout,dd", Status::Benchmark).validate().unwrap();
        let r = sample("filter", Status::Benchmark);
        assert_eq!(r.status, Status::GamingDemo);
        r.validate().unwrap();
    }

    #[test]
    fn tampered_status_is_rejected() {
        let mut v = sample("filter", Status::Benchmark).to_value();
        v["status"] = json!("benchmark");
        assert!(validate_report(&v).is_err());
        let mut v = sample("", Status::Benchmark).to_value();
        v["format_version"] = json!("0");
        assert!(validate_report(&v).is_err());
    }

    #[test]
    fn curves() {
        let out = emit_curves(&sample("", Status::Benchmark).to_value()).unwrap();
        assert_eq!(out, vec![("curve".to_string(), "x,y\n1,0.5\n".to_string())]);
        assert!(emit_curves(&json!({"metrics": {}})).is_err());
        assert!(emit_curves(&json!({"metrics": {"series": {}}})).is_err());
    }
}
