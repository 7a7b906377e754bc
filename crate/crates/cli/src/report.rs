//! Report rendering: canonical JSON, CSV and markdown.
//!
//! JSON output has object keys sorted at every level and every
//! floating-point number written with exactly six decimals, so two runs
//! with the same inputs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::experiment::ExperimentReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("nothing to report")]
    Empty,
    #[error("cannot serialize report: {0}")]
    Serialize(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const CSV_COLUMNS: [&str; 11] = [
    "assessor", "dataset", "S", "C", "U", "Pr", "F1atK", "E", "MAE", "Brier", "accuracy",
];

fn float(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) if n.is_f64() => out.push_str(&float(n.as_f64().unwrap_or(f64::NAN))),
        Value::Number(n) => out.push_str(&n.to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
    }
}

/// Serializes any value as canonical JSON.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let v = serde_json::to_value(value).map_err(|e| ReportError::Serialize(e.to_string()))?;
    let mut out = String::new();
    write_canonical(&v, &mut out);
    out.push('\n');
    Ok(out)
}

/// The aggregate row of a report, one cell per [`CSV_COLUMNS`] entry.
/// Missing metrics are empty cells.
pub fn summary_row(r: &ExperimentReport) -> Vec<String> {
    let a = &r.aggregate;
    let opt = |x: Option<f64>| x.map(float).unwrap_or_default();
    // F1@K is not defined for single-claim datasets
    let f1 = if a.accuracy.is_some() {
        String::new()
    } else {
        float(a.f1_at_k)
    };
    vec![
        r.assessor.clone(),
        r.dataset.clone(),
        float(a.supported),
        float(a.contradicted),
        float(a.undecided),
        float(a.precision),
        f1,
        opt(a.e_measure),
        opt(a.mae),
        opt(a.brier),
        opt(a.accuracy),
    ]
}

pub fn render(reports: &[ExperimentReport], format: ReportFormat) -> Result<String, ReportError> {
    if reports.is_empty() || reports.iter().all(|r| r.entries.is_empty()) {
        return Err(ReportError::Empty);
    }
    match format {
        ReportFormat::Json => canonical_json(&reports),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let ser = |e: csv::Error| ReportError::Serialize(e.to_string());
            w.write_record(CSV_COLUMNS).map_err(ser)?;
            for r in reports {
                w.write_record(summary_row(r)).map_err(ser)?;
            }
            let bytes = w.into_inner().map_err(|e| ReportError::Serialize(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| ReportError::Serialize(e.to_string()))
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", CSV_COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(CSV_COLUMNS.len()));
            for r in reports {
                let cells: Vec<String> = summary_row(r).into_iter().map(|c| c.replace('|', "\\|")).collect();
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
            Ok(out)
        }
    }
}

pub fn write_report(reports: &[ExperimentReport], path: &Path, format: ReportFormat) -> Result<(), ReportError> {
    let text = render(reports, format)?;
    std::fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}
