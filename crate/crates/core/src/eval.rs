//! Accuracy, confusion matrix and per-class recall.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{EmotionLabel, NUM_CLASSES};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
    pub per_class_recall: [f64; NUM_CLASSES],
    pub n: u64,
}

impl EvaluationReport {
    pub fn from_confusion(confusion: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        let n: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();
        let per_class_recall = std::array::from_fn(|c| {
            let row: u64 = confusion[c].iter().sum();
            if row == 0 {
                0.0
            } else {
                confusion[c][c] as f64 / row as f64
            }
        });
        Self {
            accuracy: if n == 0 { 0.0 } else { trace as f64 / n as f64 },
            confusion,
            per_class_recall,
            n,
        }
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.confusion[c][c]).sum()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn evaluate(predictions: &[EmotionLabel], truths: &[EmotionLabel]) -> Result<EvaluationReport> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (p, t) in predictions.iter().zip(truths) {
        confusion[t.index()][p.index()] += 1;
    }
    Ok(EvaluationReport::from_confusion(confusion))
}

/// `100 * num / den` with two decimals, rounding half to even. Exact for
/// integer inputs.
pub fn format_percent(num: u64, den: u64) -> String {
    if den == 0 {
        return "0.00".into();
    }
    let scaled = 10_000u128 * num as u128;
    let den = den as u128;
    let (mut q, r) = (scaled / den, scaled % den);
    if 2 * r > den || (2 * r == den && q % 2 == 1) {
        q += 1;
    }
    format!("{}.{:02}", q / 100, q % 100)
}

/// Fixed-width text rendering of a report, classes in canonical order.
pub fn render_report(r: &EvaluationReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "accuracy {} % ({}/{})",
        format_percent(r.correct(), r.n),
        r.correct(),
        r.n
    )
    .unwrap();
    write!(out, "{:<6}", "true").unwrap();
    for l in EmotionLabel::ALL {
        write!(out, "{:>6}", l.short_name()).unwrap();
    }
    writeln!(out, "{:>9}", "recall").unwrap();
    for t in EmotionLabel::ALL {
        write!(out, "{:<6}", t.short_name()).unwrap();
        for count in r.confusion[t.index()] {
            write!(out, "{count:>6}").unwrap();
        }
        let row: u64 = r.confusion[t.index()].iter().sum();
        writeln!(
            out,
            "{:>9}",
            format_percent(r.confusion[t.index()][t.index()], row)
        )
        .unwrap();
    }
    out
}
