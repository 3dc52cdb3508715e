//! Plain-text tables and JSON-lines records for evaluation reports.

use std::fmt::Write as _;

use serde::Serialize;

use hyprank_core::{Error, Result};

use crate::eval::EvalReport;

#[derive(Serialize)]
#[serde(tag = "table", rename_all = "snake_case")]
enum Record<'a> {
    Kbest { k: usize, correct: usize, n: usize, accuracy: f64 },
    Final { model: &'a str, correct: usize, n: usize, k: usize, accuracy: f64 },
}

/// Two aligned tables: k-best shortlister accuracy, then final accuracy per model.
pub fn format_table(report: &EvalReport) -> String {
    let mut out = String::new();
    writeln!(out, "Shortlister k-best accuracy ({} utterances)", report.n).unwrap();
    writeln!(out, "{:<8} {:>9}", "k", "acc (%)").unwrap();
    for a in &report.kbest {
        writeln!(out, "{:<8} {:>9.2}", a.k, a.accuracy).unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "Final accuracy over {}-best lists", report.k).unwrap();
    writeln!(out, "{:<8} {:>9}", "model", "acc (%)").unwrap();
    for m in report.rows() {
        writeln!(out, "{:<8} {:>9.2}", m.model, m.accuracy).unwrap();
    }
    out
}

/// One JSON object per table row.
pub fn format_jsonl(report: &EvalReport) -> Result<String> {
    let mut records: Vec<Record> =
        report.kbest.iter().map(|a| Record::Kbest { k: a.k, correct: a.correct, n: report.n, accuracy: a.accuracy }).collect();
    for m in report.rows() {
        records.push(Record::Final { model: &m.model, correct: m.correct, n: report.n, k: report.k, accuracy: m.accuracy });
    }
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).map_err(|e| Error::format(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn to_json(report: &EvalReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::format(e.to_string()))
}

pub fn from_json(text: &str) -> Result<EvalReport> {
    serde_json::from_str(text).map_err(|e| Error::format(format!("eval report: {e}")))
}
