//! Video-level emotion classification from per-frame face features.
//!
//! The pipeline pools a variable-length sequence of frame descriptors into one
//! fixed-length vector per video ([`aggregate`]), rescales and renormalizes it
//! ([`normalize`]), scores it with one-vs-rest linear SVMs ([`svm`]), averages
//! the scores of several feature streams and optionally reweights them by class
//! priors ([`ensemble`]), and reports accuracy and confusion ([`eval`]).
//! [`synth`] generates Gaussian-cluster datasets and brute-force oracles so the
//! whole chain can be exercised without real video data.

pub mod aggregate;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod normalize;
pub mod numeric;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    ClassWeights, EmotionLabel, FrameFeatureSequence, ScoreMatrix, Split, StreamData,
    VideoDescriptor, VideoSample, NUM_CLASSES,
};
