//! Report, history and estimate files.
//!
//! Report CSV header: `section,model,attack,class,accuracy,correct,total`.
//!
//! * `class` rows: one per (model, attack or `clean`, class).
//! * `overall` rows: one per (model, attack or `clean`), `class` empty.
//! * `bottom_k` rows: one per (model, attack, k), `class` holds `k=<percent>`.
//! * `rho` rows: one per k plus `avg` when a relative ratio is present; the
//!   ratio goes in `accuracy`.

use std::path::Path;

use advcausal_core::defenses::History;
use advcausal_core::eval::{ClassAccuracy, RobustnessReport};
use serde::Serialize;

use crate::error::{self, LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(LabError::config(format!("unknown report format '{other}'"))),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> LabResult<()> {
    error::write(path, to_json(value).as_bytes())
}

pub fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> LabResult<T> {
    let bytes = error::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| {
        LabError::format(path, format!("line {}", e.line()), e.to_string())
    })
}

#[derive(Serialize)]
struct Row<'a> {
    section: &'a str,
    model: &'a str,
    attack: &'a str,
    class: String,
    accuracy: f64,
    correct: Option<usize>,
    total: Option<usize>,
}

fn class_rows<'a>(out: &mut Vec<Row<'a>>, model: &'a str, attack: &'a str, acc: &ClassAccuracy) {
    for (c, &a) in acc.per_class.iter().enumerate() {
        out.push(Row {
            section: "class",
            model,
            attack,
            class: c.to_string(),
            accuracy: a,
            correct: Some(acc.correct[c]),
            total: Some(acc.total[c]),
        });
    }
}

fn overall_row<'a>(model: &'a str, attack: &'a str, acc: &ClassAccuracy) -> Row<'a> {
    Row {
        section: "overall",
        model,
        attack,
        class: String::new(),
        accuracy: acc.overall,
        correct: Some(acc.correct.iter().sum()),
        total: Some(acc.total.iter().sum()),
    }
}

pub fn to_csv(report: &RobustnessReport) -> String {
    let mut rows = Vec::new();
    for m in &report.models {
        class_rows(&mut rows, &m.model_id, "clean", &m.clean);
        for a in &m.attacks {
            class_rows(&mut rows, &m.model_id, a.attack.name(), &a.accuracy);
        }
    }
    for m in &report.models {
        rows.push(overall_row(&m.model_id, "clean", &m.clean));
        for a in &m.attacks {
            rows.push(overall_row(&m.model_id, a.attack.name(), &a.accuracy));
            for b in &a.bottom_k {
                rows.push(Row {
                    section: "bottom_k",
                    model: &m.model_id,
                    attack: a.attack.name(),
                    class: format!("k={}", b.k_percent),
                    accuracy: b.accuracy,
                    correct: None,
                    total: None,
                });
            }
        }
    }
    if let Some(rho) = &report.relative_ratio {
        for k in &rho.per_k {
            rows.push(Row {
                section: "rho",
                model: "",
                attack: "",
                class: format!("k={}", k.k_percent),
                accuracy: k.ratio,
                correct: None,
                total: None,
            });
        }
        rows.push(Row {
            section: "rho",
            model: "",
            attack: "",
            class: "avg".into(),
            accuracy: rho.avg,
            correct: None,
            total: None,
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

pub fn emit_report(report: &RobustnessReport, path: &Path, format: ReportFormat) -> LabResult<()> {
    match format {
        ReportFormat::Json => write_json(report, path),
        ReportFormat::Csv => error::write(path, to_csv(report).as_bytes()),
    }
}

/// Row-per-epoch CSV: `epoch,clean_acc,pgd_acc,loss,lr`.
pub fn history_csv(history: &History) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "clean_acc", "pgd_acc", "loss", "lr"]).expect("in-memory csv write");
    for r in &history.records {
        w.serialize((r.epoch, r.clean_acc, r.pgd_acc, r.loss, r.lr)).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}
