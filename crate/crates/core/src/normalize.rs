//! Descriptor normalization: per-column rescaling to [-1, 1], rootsift over
//! the whole concatenated vector, then per-column standardization. Both
//! per-column stages are fit on training descriptors only.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Columns whose training std falls below this map to zero.
pub const STD_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeScalerParams {
    #[serde(serialize_with = "crate::numeric::serde_f64::vec")]
    pub mins: Vec<f64>,
    #[serde(serialize_with = "crate::numeric::serde_f64::vec")]
    pub maxs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerParams {
    #[serde(serialize_with = "crate::numeric::serde_f64::vec")]
    pub means: Vec<f64>,
    #[serde(serialize_with = "crate::numeric::serde_f64::vec")]
    pub stds: Vec<f64>,
}

fn check_rows(rows: &[Vec<f64>], what: &str) -> Result<usize> {
    let Some(first) = rows.first() else {
        return Err(Error::InvalidInput(format!(
            "cannot fit {what} on an empty set"
        )));
    };
    let dim = first.len();
    for r in rows {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
    }
    Ok(dim)
}

fn check_dim(x: &[f64], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

pub fn fit_range_scaler(train: &[Vec<f64>]) -> Result<RangeScalerParams> {
    let dim = check_rows(train, "range scaler")?;
    let mut mins = train[0].clone();
    let mut maxs = train[0].clone();
    for row in &train[1..] {
        for j in 0..dim {
            mins[j] = mins[j].min(row[j]);
            maxs[j] = maxs[j].max(row[j]);
        }
    }
    Ok(RangeScalerParams { mins, maxs })
}

/// `2(x - min)/(max - min) - 1`, clipped to [-1, 1]; degenerate columns map to 0.
pub fn apply_range_scaler(x: &[f64], p: &RangeScalerParams) -> Result<Vec<f64>> {
    check_dim(x, p.mins.len())?;
    Ok(x.iter()
        .zip(p.mins.iter().zip(&p.maxs))
        .map(|(&v, (&lo, &hi))| {
            if hi > lo {
                (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

/// `sign(x) * sqrt(|x| / ||x||_1)`. The zero vector maps to itself.
pub fn rootsift(x: &[f64]) -> Vec<f64> {
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if l1 == 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter()
        .map(|&v| {
            let r = (v.abs() / l1).sqrt();
            if v < 0.0 {
                -r
            } else {
                r
            }
        })
        .collect()
}

pub fn fit_standardizer(train: &[Vec<f64>]) -> Result<StandardizerParams> {
    let dim = check_rows(train, "standardizer")?;
    let n = train.len() as f64;
    let mut means = vec![0.0; dim];
    for row in train {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut stds = vec![0.0; dim];
    for row in train {
        for j in 0..dim {
            let dev = row[j] - means[j];
            stds[j] += dev * dev;
        }
    }
    stds.iter_mut().for_each(|s| *s = (*s / n).sqrt());
    Ok(StandardizerParams { means, stds })
}

pub fn apply_standardizer(x: &[f64], p: &StandardizerParams) -> Result<Vec<f64>> {
    check_dim(x, p.means.len())?;
    Ok(x.iter()
        .zip(p.means.iter().zip(&p.stds))
        .map(|(&v, (&m, &s))| if s < STD_EPSILON { 0.0 } else { (v - m) / s })
        .collect())
}

/// Which normalization stages run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationConfig {
    pub range_scale: bool,
    pub rootsift: bool,
    pub standardize: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            range_scale: true,
            rootsift: true,
            standardize: true,
        }
    }
}

impl NormalizationConfig {
    pub fn none() -> Self {
        Self {
            range_scale: false,
            rootsift: false,
            standardize: false,
        }
    }
}

/// A fitted normalization chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub range_scaler: Option<RangeScalerParams>,
    pub rootsift: bool,
    pub standardizer: Option<StandardizerParams>,
}

impl Normalizer {
    pub fn identity() -> Self {
        Self {
            range_scaler: None,
            rootsift: false,
            standardizer: None,
        }
    }

    pub fn fit(train: &[Vec<f64>], cfg: NormalizationConfig) -> Result<Self> {
        check_rows(train, "normalizer")?;
        let range_scaler = cfg
            .range_scale
            .then(|| fit_range_scaler(train))
            .transpose()?;
        let mut stage = train.to_vec();
        if let Some(p) = &range_scaler {
            stage = stage
                .iter()
                .map(|x| apply_range_scaler(x, p))
                .collect::<Result<_>>()?;
        }
        if cfg.rootsift {
            stage = stage.iter().map(|x| rootsift(x)).collect();
        }
        let standardizer = cfg
            .standardize
            .then(|| fit_standardizer(&stage))
            .transpose()?;
        Ok(Self {
            range_scaler,
            rootsift: cfg.rootsift,
            standardizer,
        })
    }

    pub fn config(&self) -> NormalizationConfig {
        NormalizationConfig {
            range_scale: self.range_scaler.is_some(),
            rootsift: self.rootsift,
            standardize: self.standardizer.is_some(),
        }
    }

    /// Input dimension expected by the fitted stages, if any were fitted.
    pub fn dim(&self) -> Option<usize> {
        self.range_scaler
            .as_ref()
            .map(|p| p.mins.len())
            .or_else(|| self.standardizer.as_ref().map(|p| p.means.len()))
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = match &self.range_scaler {
            Some(p) => apply_range_scaler(x, p)?,
            None => x.to_vec(),
        };
        if self.rootsift {
            y = rootsift(&y);
        }
        if let Some(p) = &self.standardizer {
            y = apply_standardizer(&y, p)?;
        }
        Ok(y)
    }

    pub fn transform_all(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.transform(x)).collect()
    }
}

/// Fits the chain on `train` and applies it to both `train` and `others`.
pub fn normalize_pipeline(
    train: &[Vec<f64>],
    others: &[Vec<f64>],
    cfg: NormalizationConfig,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Normalizer)> {
    let norm = Normalizer::fit(train, cfg)?;
    Ok((
        norm.transform_all(train)?,
        norm.transform_all(others)?,
        norm,
    ))
}
