//! Score-level fusion of several streams, class-prior reweighting, and the
//! argmax readout.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ClassWeights, EmotionLabel, ScoreMatrix, NUM_CLASSES};
use crate::numeric::{format_float, order_free_sum};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Average raw decision values.
    Raw,
    /// Map each row to a probability vector first.
    #[default]
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub score_mode: ScoreMode,
    pub class_weights: Option<ClassWeights>,
}

/// `w_c = sqrt(n_c) / sum_k sqrt(n_k)`.
pub fn class_weights_from_counts(counts: &[u64; NUM_CLASSES]) -> Result<ClassWeights> {
    let roots = counts.map(|n| (n as f64).sqrt());
    let total: f64 = roots.iter().sum();
    if total == 0.0 {
        return Err(Error::InvalidInput("class counts are all zero".into()));
    }
    ClassWeights::new(roots.map(|r| r / total))
}

/// Exponential normalization of one row, max-subtracted.
pub fn softmax(row: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = row.map(|s| (s - max).exp());
    let total: f64 = exp.iter().sum();
    exp.map(|e| e / total)
}

/// Averages streams elementwise (after per-row softmax in softmax mode).
/// The result does not depend on the order of `streams`.
pub fn combine_streams(streams: &[ScoreMatrix], cfg: &EnsembleConfig) -> Result<ScoreMatrix> {
    let Some(first) = streams.first() else {
        return Err(Error::InvalidInput("no score streams to combine".into()));
    };
    for s in &streams[1..] {
        if s.len() != first.len() {
            return Err(Error::Shape(format!(
                "score streams have {} and {} rows",
                first.len(),
                s.len()
            )));
        }
        if let Some(row) = (0..s.len()).find(|&i| s.video_ids()[i] != first.video_ids()[i]) {
            return Err(Error::IdMismatch {
                row,
                expected: first.video_ids()[row].clone(),
                got: s.video_ids()[row].clone(),
            });
        }
    }
    let prepared: Vec<ScoreMatrix> = match cfg.score_mode {
        ScoreMode::Raw => streams.to_vec(),
        ScoreMode::Softmax => streams.iter().map(|s| s.map_rows(softmax)).collect(),
    };
    let k = prepared.len() as f64;
    let mut cell = vec![0.0; prepared.len()];
    let rows = (0..first.len())
        .map(|i| {
            let mut out = [0.0; NUM_CLASSES];
            for (c, slot) in out.iter_mut().enumerate() {
                for (v, s) in cell.iter_mut().zip(&prepared) {
                    *v = s.rows()[i][c];
                }
                *slot = order_free_sum(&mut cell) / k;
            }
            out
        })
        .collect();
    ScoreMatrix::new(first.video_ids().to_vec(), rows)
}

/// Multiplies column `c` by `w_c`. Scores must be nonnegative.
pub fn apply_class_weights(scores: &ScoreMatrix, weights: &ClassWeights) -> Result<ScoreMatrix> {
    for (id, row) in scores.video_ids().iter().zip(scores.rows()) {
        if let Some(v) = row.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "negative score {v} for {id}: class weights need nonnegative (softmax) scores"
            )));
        }
    }
    let w = weights.as_array();
    Ok(scores.map_rows(|row| {
        let mut out = *row;
        for (o, wc) in out.iter_mut().zip(w) {
            *o *= wc;
        }
        out
    }))
}

/// Per row, the lowest class index attaining the maximum.
pub fn predict(scores: &ScoreMatrix) -> Vec<EmotionLabel> {
    scores
        .rows()
        .iter()
        .map(|row| {
            let mut best = 0;
            for c in 1..NUM_CLASSES {
                if row[c] > row[best] {
                    best = c;
                }
            }
            EmotionLabel::ALL[best]
        })
        .collect()
}

/// Combine, optionally weight, and read out predictions.
pub fn run_ensemble(
    streams: &[ScoreMatrix],
    cfg: &EnsembleConfig,
) -> Result<(ScoreMatrix, Vec<EmotionLabel>)> {
    let mut combined = combine_streams(streams, cfg)?;
    if let Some(w) = &cfg.class_weights {
        if cfg.score_mode == ScoreMode::Raw {
            return Err(Error::InvalidConfig(
                "class weights require softmax score mode".into(),
            ));
        }
        combined = apply_class_weights(&combined, w)?;
    }
    let labels = predict(&combined);
    Ok((combined, labels))
}

fn header(first: &str) -> String {
    let mut s = first.to_string();
    for l in EmotionLabel::ALL {
        s.push(',');
        s.push_str(l.name());
    }
    s
}

pub fn render_scores(scores: &ScoreMatrix) -> String {
    let mut out = header("id");
    out.push('\n');
    for (id, row) in scores.video_ids().iter().zip(scores.rows()) {
        out.push_str(id);
        for v in row {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_scores(path: &Path, scores: &ScoreMatrix) -> Result<()> {
    fs::write(path, render_scores(scores)).map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

pub fn load_scores(path: &Path) -> Result<ScoreMatrix> {
    let lines = read_lines(path)?;
    let Some(((_, head), body)) = lines.split_first() else {
        return Err(Error::parse(path, 1, "empty score file"));
    };
    if head.split(',').map(str::trim).collect::<Vec<_>>().join(",") != header("id") {
        return Err(Error::parse(
            path,
            1,
            format!("expected header {}", header("id")),
        ));
    }
    let mut ids = Vec::with_capacity(body.len());
    let mut rows = Vec::with_capacity(body.len());
    for (line, text) in body {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != NUM_CLASSES + 1 {
            return Err(Error::parse(
                path,
                *line,
                format!("expected {} fields", NUM_CLASSES + 1),
            ));
        }
        let mut row = [0.0; NUM_CLASSES];
        for (slot, f) in row.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, *line, format!("bad score {f:?}")))?;
        }
        ids.push(fields[0].to_string());
        rows.push(row);
    }
    ScoreMatrix::new(ids, rows)
}

/// What the seven numbers of a weights file mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightsKind {
    /// Class frequencies; weights are their normalized square roots.
    Counts,
    /// Literal weights, rescaled to sum to one.
    Weights,
}

/// Parses seven comma-separated numbers.
pub fn parse_weights(text: &str, kind: WeightsKind) -> Result<ClassWeights> {
    let fields: Vec<&str> = text.trim().split(',').map(str::trim).collect();
    if fields.len() != NUM_CLASSES {
        return Err(Error::InvalidInput(format!(
            "expected {NUM_CLASSES} comma-separated values, got {}",
            fields.len()
        )));
    }
    match kind {
        WeightsKind::Counts => {
            let mut counts = [0u64; NUM_CLASSES];
            for (slot, f) in counts.iter_mut().zip(&fields) {
                *slot = f
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad class count {f:?}")))?;
            }
            class_weights_from_counts(&counts)
        }
        WeightsKind::Weights => {
            let mut raw = [0.0; NUM_CLASSES];
            for (slot, f) in raw.iter_mut().zip(&fields) {
                *slot = f
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad class weight {f:?}")))?;
            }
            ClassWeights::normalized(raw)
        }
    }
}

/// Reads a weights CSV: one data row of seven values, optionally preceded by
/// a header row (any row with no numeric field).
pub fn load_weights(path: &Path, kind: WeightsKind) -> Result<ClassWeights> {
    let lines = read_lines(path)?;
    let data: Vec<&(usize, String)> = lines
        .iter()
        .filter(|(_, l)| l.split(',').any(|f| f.trim().parse::<f64>().is_ok()))
        .collect();
    match data.as_slice() {
        [(line, text)] => {
            parse_weights(text, kind).map_err(|e| Error::parse(path, *line, e.to_string()))
        }
        _ => Err(Error::parse(
            path,
            1,
            "expected exactly one row of seven values",
        )),
    }
}

pub fn render_weights(weights: &ClassWeights) -> String {
    let mut out = EmotionLabel::ALL.map(|l| l.name()).join(",");
    out.push('\n');
    let values: Vec<String> = weights
        .as_array()
        .iter()
        .map(|w| format_float(*w))
        .collect();
    out.push_str(&values.join(","));
    out.push('\n');
    out
}

pub fn render_predictions(ids: &[String], labels: &[EmotionLabel]) -> String {
    let mut out = String::from("id,label\n");
    for (id, l) in ids.iter().zip(labels) {
        writeln!(out, "{id},{l}").unwrap();
    }
    out
}

pub fn load_predictions(path: &Path) -> Result<Vec<(String, EmotionLabel)>> {
    let lines = read_lines(path)?;
    let Some(((_, head), body)) = lines.split_first() else {
        return Err(Error::parse(path, 1, "empty predictions file"));
    };
    if head != "id,label" {
        return Err(Error::parse(path, 1, "expected header id,label"));
    }
    body.iter()
        .map(|(line, text)| {
            let (id, label) = text
                .split_once(',')
                .ok_or_else(|| Error::parse(path, *line, "expected id,label"))?;
            let label = EmotionLabel::from_name(label)
                .map_err(|e| Error::parse(path, *line, e.to_string()))?;
            Ok((id.trim().to_string(), label))
        })
        .collect()
}
