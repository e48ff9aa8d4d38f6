//! Slow reference computations used to check the fast paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;

/// Direct O(T^2) evaluation of `S[k] = sum_t s_t exp(-2 pi i k t / T)`.
pub fn oracle_dft(signal: &[f64]) -> Vec<Complex<f64>> {
    let n = signal.len();
    (0..n)
        .map(|k| {
            signal
                .iter()
                .enumerate()
                .map(|(t, &x)| {
                    // reduce k*t mod n first so the angle stays small and exact
                    let angle = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                    Complex::from_polar(x, angle)
                })
                .sum()
        })
        .collect()
}

/// Mean DFT magnitude per dimension via [`oracle_dft`]; `frames[t][j]`.
pub fn oracle_fft_mean(frames: &[Vec<f64>]) -> Vec<f64> {
    let dim = frames.first().map_or(0, Vec::len);
    (0..dim)
        .map(|j| {
            let col: Vec<f64> = frames.iter().map(|f| f[j]).collect();
            oracle_dft(&col).iter().map(|c| c.norm()).sum::<f64>() / col.len() as f64
        })
        .collect()
}

/// Projected subgradient descent on `1/2 |w|^2 + C sum_i max(0, 1 - y_i w.x_i)`
/// with step `1/t` (the objective is 1-strongly convex). Each iteration uses
/// the full-batch subgradient; iterates are projected onto the ball of radius
/// `sqrt(2 C N)`, which contains the minimizer, and the returned vector is the
/// running average of iterates with weights proportional to `t`. The start
/// point is a small Gaussian draw from `seed`. With `bias`, the last weight is
/// the coefficient of an appended constant-1 feature.
pub fn oracle_svm_subgradient(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    bias: bool,
    iterations: usize,
    seed: u64,
) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if bias {
                r.push(1.0);
            }
            r
        })
        .collect();
    let dim = rows.first().map_or(0, Vec::len);
    let radius = (2.0 * c * rows.len() as f64).sqrt();
    let normal = Normal::new(0.0, 1e-2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
    let mut avg = vec![0.0; dim];
    let mut weight_total = 0.0;
    let mut grad = vec![0.0; dim];

    for t in 1..=iterations {
        grad.copy_from_slice(&w);
        for (xi, &yi) in rows.iter().zip(y) {
            let margin: f64 = yi * xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            if margin < 1.0 {
                for (g, v) in grad.iter_mut().zip(xi) {
                    *g -= c * yi * v;
                }
            }
        }
        let step = 1.0 / t as f64;
        for (wj, g) in w.iter_mut().zip(&grad) {
            *wj -= step * g;
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            w.iter_mut().for_each(|v| *v *= radius / norm);
        }
        let weight = t as f64;
        weight_total += weight;
        let mix = weight / weight_total;
        for (a, v) in avg.iter_mut().zip(&w) {
            *a += mix * (v - *a);
        }
    }
    avg
}
