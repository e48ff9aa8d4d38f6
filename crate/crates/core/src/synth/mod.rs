//! Gaussian-cluster datasets that stand in for real per-frame face features.
//!
//! Each stream gets one centroid per class, drawn uniformly on a sphere of
//! radius `s / sqrt(2)` so that centroids sit about `s` apart. A video of class
//! `c` draws a per-video offset `N(0, within_video_sigma^2 I)`; each frame adds
//! `N(0, frame_sigma^2 I)` on top of `centroid + offset`, and each variant adds
//! `N(0, variant_sigma^2 I)` on top of its frame. Video `i` uses its own ChaCha
//! stream of the seed, so generation is reproducible video by video.

mod oracle;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

pub use oracle::{oracle_dft, oracle_fft_mean, oracle_svm_subgradient};

use crate::ingest::{
    write_audio_features, write_frame_features, write_manifest, Manifest, ManifestEntry,
};
use crate::model::{
    EmotionLabel, FrameFeatureSequence, Split, StreamData, VideoSample, NUM_CLASSES,
};
use crate::{Error, Result};

pub const AUDIO_STREAM: &str = "audio";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitCounts {
    pub train: [usize; NUM_CLASSES],
    pub val: [usize; NUM_CLASSES],
    pub test: [usize; NUM_CLASSES],
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> &[usize; NUM_CLASSES] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dim: usize,
    pub frames_min: usize,
    pub frames_max: usize,
    pub variants: usize,
    pub class_separation: f64,
    pub within_video_sigma: f64,
    pub frame_sigma: f64,
    pub variant_sigma: f64,
    pub counts: SplitCounts,
    /// Names of the frame-feature streams; each has its own centroids.
    pub streams: Vec<String>,
    /// Adds a single-vector stream named `audio` of this length.
    pub audio_dim: Option<usize>,
    /// Whether test entries carry their label in the manifest.
    pub label_test: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            frames_min: 4,
            frames_max: 12,
            variants: 1,
            class_separation: 10.0,
            within_video_sigma: 1.0,
            frame_sigma: 1.0,
            variant_sigma: 0.0,
            counts: SplitCounts {
                train: [10; NUM_CLASSES],
                val: [5; NUM_CLASSES],
                test: [0; NUM_CLASSES],
            },
            streams: vec!["visual".into()],
            audio_dim: None,
            label_test: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dim == 0 || self.variants == 0 || self.frames_min == 0 {
            return bad("dim, variants and frames_min must be positive".into());
        }
        if self.frames_min > self.frames_max {
            return bad(format!(
                "frames_min {} > frames_max {}",
                self.frames_min, self.frames_max
            ));
        }
        for (name, v) in [
            ("class_separation", self.class_separation),
            ("within_video_sigma", self.within_video_sigma),
            ("frame_sigma", self.frame_sigma),
            ("variant_sigma", self.variant_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.streams.is_empty() && self.audio_dim.is_none() {
            return bad("no streams to generate".into());
        }
        for (i, s) in self.streams.iter().enumerate() {
            if s.is_empty()
                || self.streams[..i].contains(s)
                || (s == AUDIO_STREAM && self.audio_dim.is_some())
            {
                return bad(format!("stream name {s:?} is empty or repeated"));
            }
        }
        if self.audio_dim == Some(0) {
            return bad("audio_dim must be positive".into());
        }
        Ok(())
    }
}

/// Generated samples plus the centroids behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub samples: Vec<VideoSample>,
    /// stream name -> one centroid per class
    pub centroids: BTreeMap<String, Vec<Vec<f64>>>,
}

impl SynthDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &VideoSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; dim];
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    (0..dim).map(|_| normal.sample(rng)).collect()
}

/// Uniform point on the sphere of the given radius.
fn sphere_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x * radius / norm).collect();
        }
    }
}

/// Builds the dataset in memory.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let radius = cfg.class_separation / std::f64::consts::SQRT_2;
    let mut centroids = BTreeMap::new();
    let mut layout: Vec<(String, usize)> =
        cfg.streams.iter().map(|s| (s.clone(), cfg.dim)).collect();
    if let Some(d) = cfg.audio_dim {
        layout.push((AUDIO_STREAM.to_string(), d));
    }
    for (name, dim) in &layout {
        let cs: Vec<Vec<f64>> = (0..NUM_CLASSES)
            .map(|_| sphere_point(&mut rng, *dim, radius))
            .collect();
        centroids.insert(name.clone(), cs);
    }

    let mut samples = Vec::new();
    let mut index = 0u64;
    for split in Split::ALL {
        for class in EmotionLabel::ALL {
            for _ in 0..cfg.counts.get(split)[class.index()] {
                let id = format!("vid_{index:05}");
                let mut vrng = ChaCha8Rng::seed_from_u64(cfg.seed);
                vrng.set_stream(index + 1);
                index += 1;

                let mut streams = BTreeMap::new();
                for (name, dim) in &layout {
                    let centroid = &centroids[name][class.index()];
                    let offset = gaussian_vec(&mut vrng, *dim, cfg.within_video_sigma);
                    let base: Vec<f64> = centroid.iter().zip(&offset).map(|(m, o)| m + o).collect();
                    if name == AUDIO_STREAM {
                        streams.insert(name.clone(), StreamData::Vector(base));
                        continue;
                    }
                    let frames = vrng.random_range(cfg.frames_min..=cfg.frames_max);
                    let mut data = Vec::with_capacity(frames * cfg.variants * dim);
                    for _ in 0..frames {
                        let noise = gaussian_vec(&mut vrng, *dim, cfg.frame_sigma);
                        let frame: Vec<f64> = base.iter().zip(&noise).map(|(b, n)| b + n).collect();
                        for _ in 0..cfg.variants {
                            let jitter = gaussian_vec(&mut vrng, *dim, cfg.variant_sigma);
                            data.extend(frame.iter().zip(&jitter).map(|(f, j)| f + j));
                        }
                    }
                    let seq = FrameFeatureSequence::new(&id, frames, cfg.variants, *dim, data)?;
                    streams.insert(name.clone(), StreamData::Frames(seq));
                }
                samples.push(VideoSample::new(id, split, Some(class), streams)?);
            }
        }
    }
    Ok(SynthDataset { samples, centroids })
}

/// Writes `manifest.jsonl` plus `<stream>/<id>.csv` files under `dir`.
pub fn write_dataset(dataset: &SynthDataset, dir: &Path, label_test: bool) -> Result<Manifest> {
    let mut entries = Vec::with_capacity(dataset.samples.len());
    for s in &dataset.samples {
        let mut streams = BTreeMap::new();
        for (name, data) in &s.streams {
            let rel = PathBuf::from(name).join(format!("{}.csv", s.video_id));
            let path = dir.join(&rel);
            match data {
                StreamData::Frames(seq) => write_frame_features(&path, seq)?,
                StreamData::Vector(v) => write_audio_features(&path, v)?,
            }
            streams.insert(name.clone(), rel);
        }
        let label = if s.split == Split::Test && !label_test {
            None
        } else {
            s.label
        };
        entries.push(ManifestEntry {
            id: s.video_id.clone(),
            split: s.split,
            label,
            streams,
        });
    }
    let manifest = Manifest {
        base_dir: dir.to_path_buf(),
        entries,
    };
    write_manifest(&dir.join("manifest.jsonl"), &manifest)?;
    Ok(manifest)
}

/// Generates and writes a dataset; returns the manifest.
pub fn generate_dataset(cfg: &SynthConfig, dir: &Path) -> Result<Manifest> {
    let dataset = generate(cfg)?;
    write_dataset(&dataset, dir, cfg.label_test)
}

/// Binary problem with functional margin at least 1 around a random unit
/// hyperplane through the origin: `y_i (u . x_i) >= 1`. Returns rows, +1/-1
/// labels and `u`.
pub fn margin_suite(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = sphere_point(&mut rng, dim, 1.0);
    let normal = Normal::new(0.0, 2.0).unwrap();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    while x.len() < n {
        let row: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
        let side: f64 = row.iter().zip(&u).map(|(a, b)| a * b).sum();
        if side.abs() >= 1.0 {
            y.push(side.signum());
            x.push(row);
        }
    }
    (x, y, u)
}
