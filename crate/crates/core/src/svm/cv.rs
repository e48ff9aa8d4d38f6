use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_stream_model, SvmTrainConfig};
use crate::ensemble::predict;
use crate::model::EmotionLabel;
use crate::normalize::NormalizationConfig;
use crate::{Error, Result};

/// `2^k` for `k = -8, -6, .., 6`.
pub fn default_c_grid() -> Vec<f64> {
    (-4..=3).map(|k| 2f64.powi(2 * k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            grid: default_c_grid(),
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    #[serde(rename = "C")]
    pub c: f64,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub best_c: f64,
    pub folds: usize,
    pub rows: Vec<CvRow>,
}

impl CvReport {
    pub fn best(&self) -> &CvRow {
        self.rows
            .iter()
            .find(|r| r.c == self.best_c)
            .expect("best C comes from the grid")
    }
}

/// Assigns each sample a fold in `0..folds`. Within each class (canonical
/// order) samples are sorted by id, shuffled with the seeded generator, and
/// dealt round-robin; the dealing position carries over between classes so
/// small classes spread across folds.
pub fn stratified_folds(
    ids: &[String],
    labels: &[EmotionLabel],
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "folds must be >= 2, got {folds}"
        )));
    }
    if ids.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            got: labels.len(),
        });
    }
    if ids.len() < folds {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot fill {folds} folds",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; ids.len()];
    let mut dealt = 0;
    for class in EmotionLabel::ALL {
        let mut members: Vec<usize> = (0..ids.len()).filter(|&i| labels[i] == class).collect();
        members.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = dealt % folds;
            dealt += 1;
        }
    }
    Ok(assignment)
}

/// Picks the regularization constant with the best mean fold accuracy
/// (ties go to the smallest C). Normalization is re-fit on each fold's
/// training portion.
pub fn cross_validate_c(
    ids: &[String],
    x: &[Vec<f64>],
    labels: &[EmotionLabel],
    norm: NormalizationConfig,
    base: &SvmTrainConfig,
    cv: &CvConfig,
) -> Result<CvReport> {
    if cv.grid.is_empty() {
        return Err(Error::InvalidConfig("empty C grid".into()));
    }
    if let Some(bad) = cv.grid.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidConfig(format!(
            "grid value {bad} is not a positive C"
        )));
    }
    if x.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: labels.len(),
        });
    }
    let assignment = stratified_folds(ids, labels, cv.folds, cv.seed)?;

    let cells: Vec<(usize, usize)> = (0..cv.grid.len())
        .flat_map(|g| (0..cv.folds).map(move |f| (g, f)))
        .collect();
    let accuracies = cells
        .par_iter()
        .map(|&(g, fold)| {
            let (mut tr_x, mut tr_y, mut va_x, mut va_y) = (vec![], vec![], vec![], vec![]);
            for (i, &a) in assignment.iter().enumerate() {
                if a == fold {
                    va_x.push(x[i].clone());
                    va_y.push(labels[i]);
                } else {
                    tr_x.push(x[i].clone());
                    tr_y.push(labels[i]);
                }
            }
            let model = fit_stream_model(&tr_x, &tr_y, norm, &base.with_c(cv.grid[g]))?;
            let z = model.normalizer.transform_all(&va_x)?;
            let ids = (0..z.len()).map(|i| i.to_string()).collect();
            let pred = predict(&super::decision_scores(&model, ids, &z)?);
            let hits = pred.iter().zip(&va_y).filter(|(p, t)| p == t).count();
            Ok(hits as f64 / va_y.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;

    let rows: Vec<CvRow> = cv
        .grid
        .iter()
        .enumerate()
        .map(|(g, &c)| {
            let fold_accuracies = accuracies[g * cv.folds..(g + 1) * cv.folds].to_vec();
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / cv.folds as f64;
            CvRow {
                c,
                mean_accuracy,
                fold_accuracies,
            }
        })
        .collect();
    let best = rows
        .iter()
        .reduce(|best, r| {
            if r.mean_accuracy > best.mean_accuracy
                || (r.mean_accuracy == best.mean_accuracy && r.c < best.c)
            {
                r
            } else {
                best
            }
        })
        .expect("grid is non-empty");
    Ok(CvReport {
        best_c: best.c,
        folds: cv.folds,
        rows,
    })
}
