//! Binary-classification confusion matrices and the derived scores.
//!
//! Scores with a zero denominator are defined as 0 rather than NaN, so a
//! report row is always total. Reports are written as CSV (six fixed
//! decimals) together with an equivalent JSON document; both are
//! byte-stable for identical inputs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Real;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction and truth sequences differ in length: {predictions} vs {truths}")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("input sequences are empty")]
    EmptyInput,
    #[error("confusion matrix has no counts")]
    EmptyMatrix,
    #[error("report has no rows")]
    EmptyReport,
    #[error("malformed report row: {0}")]
    MalformedReport(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// TP/TN/FP/FN counts of a binary classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl ConfusionMatrix {
    pub fn new(
        true_positives: u64,
        true_negatives: u64,
        false_positives: u64,
        false_negatives: u64,
    ) -> Self {
        Self {
            true_positives,
            true_negatives,
            false_positives,
            false_negatives,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }
}

/// The five scores reported per classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow<F: Real> {
    pub accuracy: F,
    pub sensitivity: F,
    pub specificity: F,
    pub precision: F,
    pub f1: F,
}

/// Tallies a confusion matrix from paired prediction/truth labels.
pub fn tally_confusion<L: PartialEq>(
    predictions: &[L],
    truths: &[L],
    positive: &L,
) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::new(0, 0, 0, 0);
    for (pred, truth) in predictions.iter().zip(truths) {
        match (pred == positive, truth == positive) {
            (true, true) => cm.true_positives += 1,
            (true, false) => cm.false_positives += 1,
            (false, true) => cm.false_negatives += 1,
            (false, false) => cm.true_negatives += 1,
        }
    }
    Ok(cm)
}

/// Derives accuracy, sensitivity, specificity, precision, and F1.
///
/// Any score whose denominator is zero is defined as 0.
pub fn compute_metrics<F: Real>(cm: &ConfusionMatrix) -> Result<MetricsRow<F>, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let ratio = |num: u64, den: u64| -> F {
        if den == 0 {
            F::zero()
        } else {
            F::from_u64(num).expect("count fits scalar")
                / F::from_u64(den).expect("count fits scalar")
        }
    };
    let tp = cm.true_positives;
    let tn = cm.true_negatives;
    let fp = cm.false_positives;
    let fn_ = cm.false_negatives;

    let accuracy = ratio(tp + tn, cm.total());
    let sensitivity = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    let precision = ratio(tp, tp + fp);
    let two = F::one() + F::one();
    let f1 = if precision + sensitivity == F::zero() {
        F::zero()
    } else {
        two * precision * sensitivity / (precision + sensitivity)
    };
    Ok(MetricsRow {
        accuracy,
        sensitivity,
        specificity,
        precision,
        f1,
    })
}

/// One named classifier result in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsRow<Scalar>,
}

impl ReportRow {
    pub fn from_confusion(
        name: impl Into<String>,
        confusion: ConfusionMatrix,
    ) -> Result<Self, MetricsError> {
        Ok(Self {
            name: name.into(),
            metrics: compute_metrics(&confusion)?,
            confusion,
        })
    }
}

pub const REPORT_CSV_HEADER: &str =
    "name,tp,tn,fp,fn,accuracy,sensitivity,specificity,precision,f1";

/// Renders rows as CSV with six fixed decimal places.
pub fn render_csv(rows: &[ReportRow]) -> Result<String, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyReport);
    }
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let m = &row.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.name,
            row.confusion.true_positives,
            row.confusion.true_negatives,
            row.confusion.false_positives,
            row.confusion.false_negatives,
            m.accuracy,
            m.sensitivity,
            m.specificity,
            m.precision,
            m.f1
        )
        .expect("writing to string");
    }
    Ok(out)
}

/// Renders rows as JSON, with scores rounded to the same six decimals the
/// CSV carries.
pub fn render_json(rows: &[ReportRow]) -> Result<String, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyReport);
    }
    let rounded: Vec<ReportRow> = rows
        .iter()
        .map(|row| ReportRow {
            name: row.name.clone(),
            confusion: row.confusion,
            metrics: MetricsRow {
                accuracy: round6(row.metrics.accuracy),
                sensitivity: round6(row.metrics.sensitivity),
                specificity: round6(row.metrics.specificity),
                precision: round6(row.metrics.precision),
                f1: round6(row.metrics.f1),
            },
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&rounded).expect("report rows serialize");
    text.push('\n');
    Ok(text)
}

fn round6(x: Scalar) -> Scalar {
    (x * 1e6).round() / 1e6
}

/// Writes the CSV and JSON renderings of the same rows.
pub fn write_report(
    rows: &[ReportRow],
    csv_path: &Path,
    json_path: &Path,
) -> Result<(), MetricsError> {
    std::fs::write(csv_path, render_csv(rows)?)?;
    std::fs::write(json_path, render_json(rows)?)?;
    Ok(())
}

/// Parses a CSV report produced by [`render_csv`], for merging.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>, MetricsError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim_end() == REPORT_CSV_HEADER => {}
        other => {
            return Err(MetricsError::MalformedReport(format!(
                "bad header {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(MetricsError::MalformedReport(format!(
                "expected 10 fields, got {} in {line:?}",
                fields.len()
            )));
        }
        let count = |i: usize| -> Result<u64, MetricsError> {
            fields[i]
                .parse()
                .map_err(|_| MetricsError::MalformedReport(format!("bad count {:?}", fields[i])))
        };
        let score = |i: usize| -> Result<Scalar, MetricsError> {
            fields[i]
                .parse()
                .map_err(|_| MetricsError::MalformedReport(format!("bad score {:?}", fields[i])))
        };
        rows.push(ReportRow {
            name: fields[0].to_string(),
            confusion: ConfusionMatrix::new(count(1)?, count(2)?, count(3)?, count(4)?),
            metrics: MetricsRow {
                accuracy: score(5)?,
                sensitivity: score(6)?,
                specificity: score(7)?,
                precision: score(8)?,
                f1: score(9)?,
            },
        });
    }
    if rows.is_empty() {
        return Err(MetricsError::EmptyReport);
    }
    Ok(rows)
}
