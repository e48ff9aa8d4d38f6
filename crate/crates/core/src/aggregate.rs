//! Frame-to-video pooling.
//!
//! Every aggregator reduces the frame axis of a single-variant sequence to one
//! value per feature dimension. Mean, std, min and max treat the frames as an
//! unordered set: sums are accumulated in sorted order, so a shuffled video
//! produces a bit-identical descriptor. The `fft` block is the mean DFT
//! magnitude of each dimension's frame sequence and does depend on order.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::model::{FrameFeatureSequence, VideoDescriptor};
use crate::numeric::order_free_sum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Mean,
    Std,
    Min,
    Max,
    Fft,
}

impl Aggregator {
    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Mean => "mean",
            Aggregator::Std => "std",
            Aggregator::Min => "min",
            Aggregator::Max => "max",
            Aggregator::Fft => "fft",
        }
    }

    /// Applies this aggregator to a single-variant sequence.
    pub fn apply(self, seq: &FrameFeatureSequence) -> Vec<f64> {
        match self {
            Aggregator::Mean => aggregate_mean(seq),
            Aggregator::Std => aggregate_std(seq),
            Aggregator::Min => aggregate_min(seq),
            Aggregator::Max => aggregate_max(seq),
            Aggregator::Fft => aggregate_fft_mean(seq),
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(Aggregator::Mean),
            "std" => Ok(Aggregator::Std),
            "min" => Ok(Aggregator::Min),
            "max" => Ok(Aggregator::Max),
            "fft" => Ok(Aggregator::Fft),
            other => Err(Error::InvalidConfig(format!(
                "unknown aggregator {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationConfig {
    /// Blocks in concatenation order.
    pub aggregators: Vec<Aggregator>,
    pub average_variants: bool,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self::stat_star()
    }
}

impl AggregationConfig {
    pub fn new(aggregators: Vec<Aggregator>, average_variants: bool) -> Result<Self> {
        let cfg = Self {
            aggregators,
            average_variants,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mean() -> Self {
        Self {
            aggregators: vec![Aggregator::Mean],
            average_variants: false,
        }
    }

    /// mean, std, min, max
    pub fn stat() -> Self {
        Self {
            aggregators: vec![
                Aggregator::Mean,
                Aggregator::Std,
                Aggregator::Min,
                Aggregator::Max,
            ],
            average_variants: false,
        }
    }

    /// STAT without the max block.
    pub fn stat_star() -> Self {
        Self {
            aggregators: vec![Aggregator::Mean, Aggregator::Std, Aggregator::Min],
            average_variants: false,
        }
    }

    pub fn stat_star_fft() -> Self {
        Self {
            aggregators: vec![
                Aggregator::Mean,
                Aggregator::Std,
                Aggregator::Min,
                Aggregator::Fft,
            ],
            average_variants: false,
        }
    }

    pub fn with_variant_averaging(mut self, on: bool) -> Self {
        self.average_variants = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.aggregators.is_empty() {
            return Err(Error::InvalidConfig("no aggregators configured".into()));
        }
        for (i, a) in self.aggregators.iter().enumerate() {
            if self.aggregators[..i].contains(a) {
                return Err(Error::InvalidConfig(format!("aggregator {a} listed twice")));
            }
        }
        Ok(())
    }

    pub fn output_dim(&self, frame_dim: usize) -> usize {
        self.aggregators.len() * frame_dim
    }
}

/// Collapses the variant axis by arithmetic mean.
pub fn average_variants(seq: &FrameFeatureSequence) -> FrameFeatureSequence {
    let (t, v, d) = (seq.num_frames(), seq.num_variants(), seq.dim());
    if v == 1 {
        return seq.clone();
    }
    let mut data = Vec::with_capacity(t * d);
    let mut buf = vec![0.0; v];
    for frame in 0..t {
        for j in 0..d {
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = seq.vector(frame, k)[j];
            }
            data.push(set_mean(&mut buf));
        }
    }
    FrameFeatureSequence::new(seq.video_id(), t, 1, d, data)
        .expect("averaging finite values keeps shape and finiteness")
}

fn require_single_variant(seq: &FrameFeatureSequence) {
    assert_eq!(
        seq.num_variants(),
        1,
        "aggregators expect one variant per frame; call average_variants first"
    );
}

fn per_dimension(seq: &FrameFeatureSequence, f: impl Fn(&mut [f64]) -> f64) -> Vec<f64> {
    require_single_variant(seq);
    let mut col = vec![0.0; seq.num_frames()];
    (0..seq.dim())
        .map(|j| {
            for (t, slot) in col.iter_mut().enumerate() {
                *slot = seq.vector(t, 0)[j];
            }
            f(&mut col)
        })
        .collect()
}

/// Mean of an unordered set of values; exact for constant input.
fn set_mean(col: &mut [f64]) -> f64 {
    let first = col[0];
    if col.iter().all(|&x| x == first) {
        return first;
    }
    order_free_sum(col) / col.len() as f64
}

pub fn aggregate_mean(seq: &FrameFeatureSequence) -> Vec<f64> {
    per_dimension(seq, set_mean)
}

/// Population standard deviation (divides by T), so a single frame yields 0.
pub fn aggregate_std(seq: &FrameFeatureSequence) -> Vec<f64> {
    per_dimension(seq, |col| {
        let first = col[0];
        if col.iter().all(|&x| x == first) {
            return 0.0;
        }
        let n = col.len() as f64;
        let mean = order_free_sum(col) / n;
        for x in col.iter_mut() {
            *x = (*x - mean) * (*x - mean);
        }
        (order_free_sum(col) / n).sqrt()
    })
}

pub fn aggregate_min(seq: &FrameFeatureSequence) -> Vec<f64> {
    per_dimension(seq, |col| col.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn aggregate_max(seq: &FrameFeatureSequence) -> Vec<f64> {
    per_dimension(seq, |col| {
        col.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Length-T DFT of a real sequence, computed with a mixed-radix FFT.
pub fn dft(signal: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    if !buf.is_empty() {
        FftPlanner::new()
            .plan_fft_forward(buf.len())
            .process(&mut buf);
    }
    buf
}

/// Mean over all T bins (DC included) of the DFT magnitude of each
/// dimension's frame sequence. No padding: the transform length is T.
pub fn aggregate_fft_mean(seq: &FrameFeatureSequence) -> Vec<f64> {
    require_single_variant(seq);
    let t = seq.num_frames();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(t);
    let mut buf = vec![Complex::new(0.0, 0.0); t];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    (0..seq.dim())
        .map(|j| {
            for (frame, slot) in buf.iter_mut().enumerate() {
                *slot = Complex::new(seq.vector(frame, 0)[j], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            buf.iter().map(|c| c.norm()).sum::<f64>() / t as f64
        })
        .collect()
}

/// Pools `seq` into one descriptor: optional variant averaging, then each
/// configured block in order.
pub fn build_video_descriptor(
    seq: &FrameFeatureSequence,
    cfg: &AggregationConfig,
) -> Result<VideoDescriptor> {
    cfg.validate()?;
    let averaged;
    let seq = if seq.num_variants() > 1 {
        if !cfg.average_variants {
            return Err(Error::InvalidConfig(format!(
                "{} has {} variants per frame but variant averaging is off",
                seq.video_id(),
                seq.num_variants()
            )));
        }
        averaged = average_variants(seq);
        &averaged
    } else {
        seq
    };
    let mut features = Vec::with_capacity(cfg.output_dim(seq.dim()));
    let mut provenance = Vec::with_capacity(cfg.aggregators.len());
    for agg in &cfg.aggregators {
        let block = agg.apply(seq);
        provenance.push((agg.name().to_string(), block.len()));
        features.extend(block);
    }
    VideoDescriptor::new(seq.video_id(), features, provenance)
}

/// Reorders frames by a seeded uniform permutation; variants stay attached
/// to their frame.
pub fn shuffle_frames(seq: &FrameFeatureSequence, seed: u64) -> FrameFeatureSequence {
    let mut order: Vec<usize> = (0..seq.num_frames()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let data: Vec<f64> = order
        .iter()
        .flat_map(|&t| seq.frame(t).iter().copied())
        .collect();
    FrameFeatureSequence::new(
        seq.video_id(),
        seq.num_frames(),
        seq.num_variants(),
        seq.dim(),
        data,
    )
    .expect("permuting frames keeps shape and finiteness")
}
