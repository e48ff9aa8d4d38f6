//! Domain types shared by every pipeline stage.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numeric::ensure_finite;
use crate::{Error, Result};

pub const NUM_CLASSES: usize = 7;

/// The seven emotion classes, in the canonical column order used by every
/// score matrix, weight vector and report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmotionLabel {
    Angry,
    Disgust,
    Fear,
    Happy,
    Neutral,
    Sad,
    Surprise,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_CLASSES] = [
        EmotionLabel::Angry,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happy,
        EmotionLabel::Neutral,
        EmotionLabel::Sad,
        EmotionLabel::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Angry => "Angry",
            EmotionLabel::Disgust => "Disgust",
            EmotionLabel::Fear => "Fear",
            EmotionLabel::Happy => "Happy",
            EmotionLabel::Neutral => "Neutral",
            EmotionLabel::Sad => "Sad",
            EmotionLabel::Surprise => "Surprise",
        }
    }

    /// Two-letter column header used in rendered tables.
    pub fn short_name(self) -> &'static str {
        &self.name()[..2]
    }

    /// Case-insensitive lookup on the seven names.
    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s)
    }
}

impl Serialize for EmotionLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::from_name(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    /// Train and val samples must carry a label.
    pub fn requires_label(self) -> bool {
        !matches!(self, Split::Test)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!(
                "bad split {other:?} (expected train, val or test)"
            ))),
        }
    }
}

/// Per-video frame features stored as a dense `frames × variants × dim`
/// tensor in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureSequence {
    video_id: String,
    frames: usize,
    variants: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FrameFeatureSequence {
    pub fn new(
        video_id: impl Into<String>,
        frames: usize,
        variants: usize,
        dim: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if frames == 0 || variants == 0 || dim == 0 {
            return Err(Error::Shape(format!(
                "{video_id}: need at least one frame, variant and dimension (got {frames}x{variants}x{dim})"
            )));
        }
        if data.len() != frames * variants * dim {
            return Err(Error::Shape(format!(
                "{video_id}: {} values do not fill {frames}x{variants}x{dim}",
                data.len()
            )));
        }
        ensure_finite(&data, || format!("in frame features of {video_id}"))?;
        Ok(Self {
            video_id,
            frames,
            variants,
            dim,
            data,
        })
    }

    /// Single-variant sequence from one vector per frame.
    pub fn from_frames(video_id: impl Into<String>, frames: Vec<Vec<f64>>) -> Result<Self> {
        let video_id = video_id.into();
        let dim = frames.first().map_or(0, Vec::len);
        if let Some(bad) = frames.iter().find(|f| f.len() != dim) {
            return Err(Error::Shape(format!(
                "{video_id}: ragged frames ({} vs {dim} dims)",
                bad.len()
            )));
        }
        let t = frames.len();
        Self::new(video_id, t, 1, dim, frames.concat())
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn with_video_id(mut self, video_id: impl Into<String>) -> Self {
        self.video_id = video_id.into();
        self
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn num_variants(&self) -> usize {
        self.variants
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn vector(&self, frame: usize, variant: usize) -> &[f64] {
        let start = (frame * self.variants + variant) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// The `dim`-length sequence of dimension `j` across frames, for variant 0.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.frames).map(|t| self.vector(t, 0)[j]).collect()
    }

    /// All variants of one frame, contiguous.
    pub fn frame(&self, frame: usize) -> &[f64] {
        let len = self.variants * self.dim;
        &self.data[frame * len..(frame + 1) * len]
    }
}

/// One stream's raw input for a video: frame features, or a single
/// precomputed vector (audio).
#[derive(Debug, Clone, PartialEq)]
pub enum StreamData {
    Frames(FrameFeatureSequence),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub video_id: String,
    pub split: Split,
    pub label: Option<EmotionLabel>,
    pub streams: BTreeMap<String, StreamData>,
}

impl VideoSample {
    pub fn new(
        video_id: impl Into<String>,
        split: Split,
        label: Option<EmotionLabel>,
        streams: BTreeMap<String, StreamData>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if split.requires_label() && label.is_none() {
            return Err(Error::InvalidInput(format!(
                "{video_id}: {split} sample has no label"
            )));
        }
        Ok(Self {
            video_id,
            split,
            label,
            streams,
        })
    }
}

/// Fixed-length video-level feature vector with the layout of its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoDescriptor {
    pub video_id: String,
    pub features: Vec<f64>,
    /// `(block name, block length)` in concatenation order.
    pub provenance: Vec<(String, usize)>,
}

impl VideoDescriptor {
    pub fn new(
        video_id: impl Into<String>,
        features: Vec<f64>,
        provenance: Vec<(String, usize)>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        let total: usize = provenance.iter().map(|(_, n)| n).sum();
        if total != features.len() {
            return Err(Error::Shape(format!(
                "{video_id}: provenance covers {total} columns but descriptor has {}",
                features.len()
            )));
        }
        ensure_finite(&features, || format!("in descriptor of {video_id}"))?;
        Ok(Self {
            video_id,
            features,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Per-video scores, one column per class in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    video_ids: Vec<String>,
    scores: Vec<[f64; NUM_CLASSES]>,
}

impl ScoreMatrix {
    pub fn new(video_ids: Vec<String>, scores: Vec<[f64; NUM_CLASSES]>) -> Result<Self> {
        if video_ids.len() != scores.len() {
            return Err(Error::Shape(format!(
                "{} ids for {} score rows",
                video_ids.len(),
                scores.len()
            )));
        }
        for (id, row) in video_ids.iter().zip(&scores) {
            ensure_finite(row, || format!("in scores of {id}"))?;
        }
        Ok(Self { video_ids, scores })
    }

    pub fn video_ids(&self) -> &[String] {
        &self.video_ids
    }

    pub fn rows(&self) -> &[[f64; NUM_CLASSES]] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub(crate) fn map_rows(&self, f: impl Fn(&[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES]) -> Self {
        Self {
            video_ids: self.video_ids.clone(),
            scores: self.scores.iter().map(f).collect(),
        }
    }
}

/// Seven nonnegative per-class multipliers summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassWeights([f64; NUM_CLASSES]);

impl ClassWeights {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(weights: [f64; NUM_CLASSES]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(format!(
                "class weights must be finite and nonnegative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "class weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Rescales arbitrary nonnegative weights to sum to one.
    pub fn normalized(raw: [f64; NUM_CLASSES]) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(format!(
                "class weights must be finite and nonnegative: {raw:?}"
            )));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidInput("class weights are all zero".into()));
        }
        Self::new(raw.map(|w| w / sum))
    }

    pub fn uniform() -> Self {
        Self([1.0 / NUM_CLASSES as f64; NUM_CLASSES])
    }

    pub fn as_array(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }

    pub fn get(&self, label: EmotionLabel) -> f64 {
        self.0[label.index()]
    }
}

impl<'de> Deserialize<'de> for ClassWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = <[f64; NUM_CLASSES]>::deserialize(d)?;
        ClassWeights::new(raw).map_err(serde::de::Error::custom)
    }
}
