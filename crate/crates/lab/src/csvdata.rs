//! Numeric CSV ingestion with per-column min-max scaling.

use std::path::Path;

use advcausal_core::data::{LabeledDataset, Split};
use advcausal_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

/// Per-feature `(min, max)` fitted on a training file, reusable on its test file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub ranges: Vec<(f64, f64)>,
}

impl Normalization {
    fn fit(rows: &[Vec<f64>], dim: usize) -> Self {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
        for row in rows {
            for (r, &v) in ranges.iter_mut().zip(row) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        Self { ranges }
    }

    /// Constant columns map to zero; values outside the fitted range are clipped.
    pub fn apply(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = self.ranges[j];
        if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub data: LabeledDataset,
    pub normalization: Normalization,
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads a rectangular numeric CSV. The first row is a header when none of its
/// cells parse as numbers. Labels must be non-negative integers below
/// `num_classes` (default: largest label plus one). Row numbers in errors are
/// 1-based file lines.
pub fn load_csv(
    path: &Path,
    label_column: usize,
    num_classes: Option<usize>,
    normalization: Option<&Normalization>,
    split: Split,
) -> LabResult<CsvDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut lines = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| csv_error(path, e))?;
        if i == 0 && record.iter().all(|c| parse_cell(c).is_none()) {
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(LabError::format(
                path,
                format!("row {line}"),
                format!("{} fields, expected {w}", record.len()),
            ));
        }
        if label_column >= w {
            return Err(LabError::format(
                path,
                format!("row {line}"),
                format!("label column {label_column} out of range for {w} columns"),
            ));
        }
        let mut row = Vec::with_capacity(w - 1);
        for (j, cell) in record.iter().enumerate() {
            let v = parse_cell(cell).ok_or_else(|| {
                LabError::format(path, format!("row {line}"), format!("non-numeric cell '{cell}' in column {j}"))
            })?;
            if j == label_column {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(LabError::format(path, format!("row {line}"), format!("label {v} is not a class index")));
                }
                labels.push(v as usize);
                lines.push(line);
            } else {
                row.push(v);
            }
        }
        features.push(row);
    }
    if features.is_empty() {
        return Err(LabError::format(path, "row 1", "no data rows"));
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(LabError::format(path, "row 1", "no feature columns"));
    }
    let classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(2, |m| (m + 1).max(2)));
    if let Some(i) = labels.iter().position(|&l| l >= classes) {
        return Err(LabError::format(
            path,
            format!("row {}", lines[i]),
            format!("label {} out of range for {classes} classes", labels[i]),
        ));
    }
    let norm = match normalization {
        Some(n) if n.ranges.len() == dim => n.clone(),
        Some(n) => {
            return Err(LabError::format(
                path,
                "row 1",
                format!("{dim} features but normalization has {}", n.ranges.len()),
            ))
        }
        None => Normalization::fit(&features, dim),
    };
    let flat: Vec<f64> = features
        .iter()
        .flat_map(|row| row.iter().enumerate().map(|(j, &v)| norm.apply(j, v)))
        .collect();
    let data = LabeledDataset::new(Tensor::new(vec![features.len(), dim], flat)?, labels, classes, split)?;
    Ok(CsvDataset {
        data,
        normalization: norm,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> LabError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => LabError::io(path, source),
        other => LabError::format(path, format!("row {line}"), format!("{other:?}")),
    }
}
