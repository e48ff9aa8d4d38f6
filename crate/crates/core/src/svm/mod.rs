//! One-vs-rest linear SVMs over normalized video descriptors.

mod cv;
mod solver;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cv::{cross_validate_c, default_c_grid, stratified_folds, CvConfig, CvReport, CvRow};
pub use solver::{
    decision_value, dual_objective_of, primal_objective, train_binary, train_binary_traced,
    BinarySolution, EpochStats,
};

use crate::model::{EmotionLabel, ScoreMatrix, VideoDescriptor, NUM_CLASSES};
use crate::normalize::{NormalizationConfig, Normalizer, RangeScalerParams, StandardizerParams};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmTrainConfig {
    #[serde(rename = "C", serialize_with = "crate::numeric::serde_f64::scalar")]
    pub c: f64,
    #[serde(serialize_with = "crate::numeric::serde_f64::scalar")]
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub bias: bool,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-4,
            max_epochs: 1000,
            seed: 0,
            bias: true,
        }
    }
}

impl SvmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be positive".into()));
        }
        Ok(())
    }

    pub fn with_c(self, c: f64) -> Self {
        Self { c, ..self }
    }
}

/// Seven class-vs-rest weight vectors plus the normalization they expect.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub config: SvmTrainConfig,
    pub normalizer: Normalizer,
    /// One vector per class in canonical order; the last entry is the
    /// intercept when `config.bias` is set.
    pub weights: Vec<Vec<f64>>,
}

impl LinearSvmModel {
    /// Descriptor length the weights expect (before bias augmentation).
    pub fn input_dim(&self) -> usize {
        self.weights[0].len() - usize::from(self.config.bias)
    }

    /// Normalizes raw descriptors and scores them.
    pub fn score_descriptors(&self, descriptors: &[VideoDescriptor]) -> Result<ScoreMatrix> {
        let ids = descriptors.iter().map(|d| d.video_id.clone()).collect();
        let x = descriptors
            .iter()
            .map(|d| self.normalizer.transform(&d.features))
            .collect::<Result<Vec<_>>>()?;
        decision_scores(self, ids, &x)
    }
}

/// Trains one binary problem per class on already-normalized rows. Class
/// `c` uses seed `cfg.seed + c`.
pub fn train_ovr(
    x: &[Vec<f64>],
    labels: &[EmotionLabel],
    cfg: &SvmTrainConfig,
) -> Result<LinearSvmModel> {
    cfg.validate()?;
    if x.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: labels.len(),
        });
    }
    let design = solver::Design::new(x, cfg.bias)?;
    let weights = EmotionLabel::ALL
        .par_iter()
        .map(|&class| {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            let class_cfg = SvmTrainConfig {
                seed: cfg.seed.wrapping_add(class.index() as u64),
                ..*cfg
            };
            solver::solve(&design, &y, &class_cfg, None).map(|s| s.weights)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearSvmModel {
        config: *cfg,
        normalizer: Normalizer::identity(),
        weights,
    })
}

/// Fits the normalization chain on `x` then trains one-vs-rest on the
/// normalized rows.
pub fn fit_stream_model(
    x: &[Vec<f64>],
    labels: &[EmotionLabel],
    norm: NormalizationConfig,
    cfg: &SvmTrainConfig,
) -> Result<LinearSvmModel> {
    let normalizer = Normalizer::fit(x, norm)?;
    let z = normalizer.transform_all(x)?;
    let model = train_ovr(&z, labels, cfg)?;
    Ok(LinearSvmModel {
        normalizer,
        ..model
    })
}

/// Raw decision values `w_c . x_i` for already-normalized rows.
pub fn decision_scores(
    model: &LinearSvmModel,
    video_ids: Vec<String>,
    x: &[Vec<f64>],
) -> Result<ScoreMatrix> {
    let dim = model.input_dim();
    let rows = x
        .iter()
        .map(|xi| {
            if xi.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: xi.len(),
                });
            }
            let mut row = [0.0; NUM_CLASSES];
            for (slot, w) in row.iter_mut().zip(&model.weights) {
                *slot = decision_value(w, xi);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    ScoreMatrix::new(video_ids, rows)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    config: SvmTrainConfig,
    rootsift: bool,
    range_scaler: Option<RangeScalerParams>,
    standardizer: Option<StandardizerParams>,
    #[serde(serialize_with = "crate::numeric::serde_f64::vec_of_vec")]
    weights: Vec<Vec<f64>>,
    label_order: Vec<String>,
}

impl LinearSvmModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config,
            rootsift: self.normalizer.rootsift,
            range_scaler: self.normalizer.range_scaler.clone(),
            standardizer: self.normalizer.standardizer.clone(),
            weights: self.weights.clone(),
            label_order: EmotionLabel::ALL
                .iter()
                .map(|l| l.name().to_string())
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format_version {}",
                file.format_version
            )));
        }
        let canonical: Vec<&str> = EmotionLabel::ALL.iter().map(|l| l.name()).collect();
        if file.label_order != canonical {
            return Err(Error::InvalidInput(format!(
                "model label_order {:?} differs from {canonical:?}",
                file.label_order
            )));
        }
        if file.weights.len() != NUM_CLASSES {
            return Err(Error::Shape(format!(
                "model has {} weight vectors, expected {NUM_CLASSES}",
                file.weights.len()
            )));
        }
        let width = file.weights[0].len();
        let bias = usize::from(file.config.bias);
        if width < bias || file.weights.iter().any(|w| w.len() != width) {
            return Err(Error::Shape(
                "model weight vectors have inconsistent lengths".into(),
            ));
        }
        for w in &file.weights {
            crate::numeric::ensure_finite(w, || "in model weights".into())?;
        }
        let normalizer = Normalizer {
            range_scaler: file.range_scaler,
            rootsift: file.rootsift,
            standardizer: file.standardizer,
        };
        let dim = width - bias;
        let stage_dims = [
            normalizer
                .range_scaler
                .as_ref()
                .map(|p| (p.mins.len(), p.maxs.len())),
            normalizer
                .standardizer
                .as_ref()
                .map(|p| (p.means.len(), p.stds.len())),
        ];
        if stage_dims
            .iter()
            .flatten()
            .any(|&(a, b)| a != dim || b != dim)
        {
            return Err(Error::Shape(format!(
                "normalization parameters do not match weight dimension {dim}"
            )));
        }
        Ok(Self {
            config: file.config,
            normalizer,
            weights: file.weights,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::predict;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clusters(per_class: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<EmotionLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut labels = Vec::new();
        for class in EmotionLabel::ALL {
            for _ in 0..per_class {
                let mut row: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.3..0.3)).collect();
                row[class.index()] += 5.0;
                x.push(row);
                labels.push(class);
            }
        }
        (x, labels)
    }

    #[test]
    fn single_class_training_set() {
        let x = vec![vec![0.1, 0.4], vec![-2.0, 1.0], vec![0.0, 0.0]];
        let labels = vec![EmotionLabel::Happy; 3];
        let model = train_ovr(&x, &labels, &SvmTrainConfig::default()).unwrap();
        let scores = decision_scores(&model, vec!["a".into(), "b".into(), "c".into()], &x).unwrap();
        assert_eq!(predict(&scores), labels);
    }

    #[test]
    fn separated_clusters_fit_perfectly() {
        let (x, labels) = clusters(6, 9, 1);
        let model = train_ovr(&x, &labels, &SvmTrainConfig::default()).unwrap();
        let ids = (0..x.len()).map(|i| i.to_string()).collect();
        let scores = decision_scores(&model, ids, &x).unwrap();
        assert_eq!(predict(&scores), labels);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, labels) = clusters(4, 8, 2);
        let cfg = SvmTrainConfig {
            seed: 17,
            ..SvmTrainConfig::default()
        };
        let a = fit_stream_model(&x, &labels, NormalizationConfig::default(), &cfg).unwrap();
        let b = fit_stream_model(&x, &labels, NormalizationConfig::default(), &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn decision_score_examples() {
        let zero = LinearSvmModel {
            config: SvmTrainConfig::default(),
            normalizer: Normalizer::identity(),
            weights: vec![vec![0.0; 4]; NUM_CLASSES],
        };
        let s = decision_scores(&zero, vec!["v".into()], &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(s.rows()[0], [0.0; NUM_CLASSES]);
        assert!(decision_scores(&zero, vec!["v".into()], &[vec![1.0]]).is_err());

        let e1 = LinearSvmModel {
            config: SvmTrainConfig {
                bias: false,
                ..SvmTrainConfig::default()
            },
            normalizer: Normalizer::identity(),
            weights: vec![vec![1.0, 0.0, 0.0]; NUM_CLASSES],
        };
        let s = decision_scores(&e1, vec!["v".into()], &[vec![2.0, -4.0, 9.0]]).unwrap();
        assert_eq!(s.rows()[0], [2.0; NUM_CLASSES]);
    }

    #[test]
    fn decision_scores_match_naive_dot() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let weights: Vec<Vec<f64>> = (0..NUM_CLASSES)
            .map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let model = LinearSvmModel {
            config: SvmTrainConfig::default(),
            normalizer: Normalizer::identity(),
            weights: weights.clone(),
        };
        let x: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let s = decision_scores(&model, (0..10).map(|i| i.to_string()).collect(), &x).unwrap();
        for (i, xi) in x.iter().enumerate() {
            for c in 0..NUM_CLASSES {
                let mut naive = weights[c][5];
                for j in 0..5 {
                    naive += weights[c][j] * xi[j];
                }
                assert!((s.rows()[i][c] - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn argmax_invariant_to_weight_scaling() {
        let (x, labels) = clusters(3, 8, 4);
        let model = train_ovr(&x, &labels, &SvmTrainConfig::default()).unwrap();
        let scaled = LinearSvmModel {
            weights: model
                .weights
                .iter()
                .map(|w| w.iter().map(|v| v * 3.7).collect())
                .collect(),
            ..model.clone()
        };
        let ids: Vec<String> = (0..x.len()).map(|i| i.to_string()).collect();
        let a = predict(&decision_scores(&model, ids.clone(), &x).unwrap());
        let b = predict(&decision_scores(&scaled, ids, &x).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn model_file_round_trip() {
        let (x, labels) = clusters(3, 8, 5);
        let model = fit_stream_model(
            &x,
            &labels,
            NormalizationConfig::default(),
            &SvmTrainConfig::default(),
        )
        .unwrap();
        let json = model.to_json();
        let back = LinearSvmModel::from_json(&json).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_json(), json);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["label_order"][6], "Surprise");
        assert_eq!(v["weights"].as_array().unwrap().len(), 7);
        assert!(v["range_scaler"]["mins"].is_array());
        assert!(v["standardizer"]["stds"].is_array());

        let bad = json.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(LinearSvmModel::from_json(&bad).is_err());
        let bad = json.replace("\"Angry\"", "\"Anger\"");
        assert!(LinearSvmModel::from_json(&bad).is_err());
    }
}
