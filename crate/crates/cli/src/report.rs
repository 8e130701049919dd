//! Report structure and its JSON / CSV renderings.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

/// How a reported number was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    /// Closed form or exact reference computation.
    Exact,
    /// Heuristic search result that can only overstate the true value.
    UpperBound,
    /// Monte Carlo estimate reported with a two-sided interval.
    MonteCarlo,
    /// Monte Carlo quantity made conservative by a one-sided confidence bound.
    McLowerConfidence,
    /// Arithmetic on other reported values.
    Derived,
}

impl ValueKind {
    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Exact => "exact",
            ValueKind::UpperBound => "upper_bound",
            ValueKind::MonteCarlo => "mc",
            ValueKind::McLowerConfidence => "mc_lower_confidence",
            ValueKind::Derived => "derived",
        }
    }

    pub fn width(exact: bool) -> Self {
        if exact {
            ValueKind::Exact
        } else {
            ValueKind::UpperBound
        }
    }
}

/// One parameter combination of a sweep.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ResultRow {
    pub params: BTreeMap<String, f64>,
    /// Scalar outputs (numbers, booleans, short strings).
    pub values: Map<String, Value>,
    /// Provenance of each numeric value, keyed like `values`.
    pub flags: BTreeMap<String, ValueKind>,
    /// Confidence level attached to Monte Carlo values.
    pub confidence: BTreeMap<String, f64>,
    /// Nested payload (per-k tables, sub-reports).
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

impl ResultRow {
    pub fn new(params: BTreeMap<String, f64>) -> Self {
        ResultRow {
            params,
            ..ResultRow::default()
        }
    }

    pub fn value(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        self.values.insert(key.to_string(), v.into());
        self
    }

    /// A number with its provenance.
    pub fn number(&mut self, key: &str, v: f64, kind: ValueKind) -> &mut Self {
        self.values.insert(key.to_string(), finite_or_null(v));
        self.flags.insert(key.to_string(), kind);
        self
    }

    pub fn with_confidence(&mut self, key: &str, level: f64) -> &mut Self {
        self.confidence.insert(key.to_string(), level);
        self
    }
}

/// JSON has no infinities or NaN; those become `null`.
pub fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else {
        Value::Null
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub library_version: &'static str,
    pub seed: u64,
    pub parallel: bool,
    pub workers: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub config: Value,
    pub results: Vec<ResultRow>,
    /// Experiment-level conclusions (all-pass flags, monotonicity and so on).
    pub summary: Map<String, Value>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// One row per parameter combination; columns are the union of
    /// parameters, scalar values, flags and confidence levels.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut columns: Vec<String> = vec!["experiment".into(), "row".into()];
        let mut push = |c: String| {
            if !columns.contains(&c) {
                columns.push(c);
            }
        };
        for row in &self.results {
            row.params.keys().for_each(|k| push(format!("param.{k}")));
        }
        for row in &self.results {
            row.values.keys().for_each(|k| push(k.clone()));
        }
        for row in &self.results {
            row.flags.keys().for_each(|k| push(format!("flag.{k}")));
            row.confidence.keys().for_each(|k| push(format!("confidence.{k}")));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&columns)?;
        for (i, row) in self.results.iter().enumerate() {
            let record: Vec<String> = columns
                .iter()
                .map(|c| match c.as_str() {
                    "experiment" => self.experiment.clone(),
                    "row" => i.to_string(),
                    _ => cell(row, c),
                })
                .collect();
            w.write_record(&record)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn render(&self, format: Format) -> Result<String, csv::Error> {
        match format {
            Format::Json => Ok(self.to_json()),
            Format::Csv => self.to_csv(),
        }
    }

    pub fn write_to(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        let text = self.render(format).map_err(std::io::Error::other)?;
        out.write_all(text.as_bytes())?;
        if !text.ends_with('\n') {
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn cell(row: &ResultRow, column: &str) -> String {
    if let Some(k) = column.strip_prefix("param.") {
        return row.params.get(k).map(|v| v.to_string()).unwrap_or_default();
    }
    if let Some(k) = column.strip_prefix("flag.") {
        return row.flags.get(k).map(|f| f.name().to_string()).unwrap_or_default();
    }
    if let Some(k) = column.strip_prefix("confidence.") {
        return row.confidence.get(k).map(|v| v.to_string()).unwrap_or_default();
    }
    match row.values.get(column) {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(v) => v.to_string(),
    }
}
