//! Dual coordinate descent for the L2-regularized L1-hinge linear SVM.
//!
//! Solves
//!
//! ```text
//!   min_w  1/2 |w|^2 + C * sum_i max(0, 1 - y_i w.x_i)
//! ```
//!
//! through its dual `max_a sum_i a_i - 1/2 |sum_i a_i y_i x_i|^2` subject to
//! `0 <= a_i <= C`, one coordinate at a time with an exact clipped Newton step.
//! The primal vector `w = sum_i a_i y_i x_i` is maintained incrementally. When
//! the bias is enabled every row gets an appended constant-1 feature, so the
//! intercept is regularized like any other weight.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SvmTrainConfig;
use crate::numeric::{dot, ensure_finite};
use crate::{Error, Result};

/// Row-major sample matrix with the optional bias column already appended.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    data: Vec<f64>,
    cols: usize,
    rows: usize,
}

impl Design {
    pub(crate) fn new(x: &[Vec<f64>], bias: bool) -> Result<Self> {
        let Some(first) = x.first() else {
            return Err(Error::InvalidInput("no training samples".into()));
        };
        let dim = first.len();
        let cols = dim + usize::from(bias);
        let mut data = Vec::with_capacity(x.len() * cols);
        for (i, row) in x.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            ensure_finite(row, || format!("in training row {i}"))?;
            data.extend_from_slice(row);
            if bias {
                data.push(1.0);
            }
        }
        Ok(Self {
            data,
            cols,
            rows: x.len(),
        })
    }

    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Result of one binary fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    /// Primal weights, length `D + 1` when the bias feature is on.
    pub weights: Vec<f64>,
    /// Dual variables, one per sample, each in `[0, C]`.
    pub alpha: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

/// Per-epoch solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub dual_objective: f64,
    /// Largest projected-gradient magnitude seen during the epoch.
    pub max_violation: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

fn check_labels(y: &[f64], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidInput(format!(
            "binary labels must be +1 or -1, got {bad}"
        )));
    }
    Ok(())
}

/// Trains one binary classifier. `y` holds +1/-1 labels.
pub fn train_binary(x: &[Vec<f64>], y: &[f64], cfg: &SvmTrainConfig) -> Result<BinarySolution> {
    let design = Design::new(x, cfg.bias)?;
    solve(&design, y, cfg, None)
}

/// As [`train_binary`], also returning one [`EpochStats`] per epoch.
pub fn train_binary_traced(
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &SvmTrainConfig,
) -> Result<(BinarySolution, Vec<EpochStats>)> {
    let design = Design::new(x, cfg.bias)?;
    let mut trace = Vec::new();
    let sol = solve(&design, y, cfg, Some(&mut trace))?;
    Ok((sol, trace))
}

pub(crate) fn solve(
    design: &Design,
    y: &[f64],
    cfg: &SvmTrainConfig,
    mut trace: Option<&mut Vec<EpochStats>>,
) -> Result<BinarySolution> {
    cfg.validate()?;
    check_labels(y, design.rows)?;
    let c = cfg.c;
    let n = design.rows;
    let q_diag: Vec<f64> = (0..n).map(|i| dot(design.row(i), design.row(i))).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; design.cols];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut epochs = 0;
    let mut converged = false;
    while epochs < cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut max_violation: f64 = 0.0;
        for &i in &order {
            let xi = design.row(i);
            let grad = y[i] * dot(&w, xi) - 1.0;
            let projected = if alpha[i] <= 0.0 {
                grad.min(0.0)
            } else if alpha[i] >= c {
                grad.max(0.0)
            } else {
                grad
            };
            max_violation = max_violation.max(projected.abs());
            if projected == 0.0 {
                continue;
            }
            let old = alpha[i];
            // a zero row never enters w; its dual term is linear so it saturates at C
            let new = if q_diag[i] > 0.0 {
                (old - grad / q_diag[i]).clamp(0.0, c)
            } else {
                c
            };
            let step = new - old;
            debug_assert!(
                -grad * step - 0.5 * q_diag[i] * step * step >= -1e-12 * (1.0 + grad.abs()),
                "coordinate step decreased the dual objective"
            );
            if step != 0.0 {
                alpha[i] = new;
                let scale = step * y[i];
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj += scale * xj;
                }
            }
        }
        epochs += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(EpochStats {
                dual_objective: dual_objective(&alpha, &w),
                max_violation,
                alpha_min: alpha.iter().copied().fold(f64::INFINITY, f64::min),
                alpha_max: alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
        if max_violation < cfg.tolerance {
            converged = true;
            break;
        }
    }
    Ok(BinarySolution {
        weights: w,
        alpha,
        epochs,
        converged,
    })
}

/// `sum_i a_i - 1/2 |w|^2` for the maintained `w = sum_i a_i y_i x_i`.
fn dual_objective(alpha: &[f64], w: &[f64]) -> f64 {
    alpha.iter().sum::<f64>() - 0.5 * dot(w, w)
}

/// Primal objective `1/2 |w|^2 + C * sum hinge` on raw rows; `w` may carry a
/// trailing bias weight.
pub fn primal_objective(x: &[Vec<f64>], y: &[f64], w: &[f64], c: f64) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (1.0 - yi * decision_value(w, xi)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

/// Dual objective recomputed from scratch for given duals.
pub fn dual_objective_of(x: &[Vec<f64>], y: &[f64], alpha: &[f64], bias: bool) -> f64 {
    let dim = x.first().map_or(0, Vec::len) + usize::from(bias);
    let mut w = vec![0.0; dim];
    for ((xi, yi), ai) in x.iter().zip(y).zip(alpha) {
        for (wj, v) in w.iter_mut().zip(xi.iter().chain(bias.then_some(&1.0))) {
            *wj += ai * yi * v;
        }
    }
    dual_objective(alpha, &w)
}

/// `w . x`, using `w[D]` as the intercept when `w` is one longer than `x`.
pub fn decision_value(w: &[f64], x: &[f64]) -> f64 {
    let head = dot(&w[..x.len()], x);
    if w.len() == x.len() + 1 {
        head + w[x.len()]
    } else {
        head
    }
}
