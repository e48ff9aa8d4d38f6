use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use emopool::aggregate::AggregationConfig;
use emopool::ensemble::EnsembleConfig;
use emopool::normalize::NormalizationConfig;
use emopool::numeric::mix_seed;
use emopool::svm::{CvConfig, SvmTrainConfig};

const SVM_SALT: u64 = 1;
const CV_SALT: u64 = 2;

/// Everything a pipeline run needs besides its inputs. Every field has a
/// default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Aggregation for any stream without an entry in `streams`.
    pub aggregation: AggregationConfig,
    /// Per-stream aggregation overrides. When non-empty, only these streams
    /// are aggregated.
    pub streams: BTreeMap<String, AggregationConfig>,
    pub normalization: NormalizationConfig,
    /// `seed` is replaced by one derived from the top-level seed.
    pub svm: SvmTrainConfig,
    pub ensemble: EnsembleConfig,
    /// `seed` is replaced by one derived from the top-level seed.
    pub cv: CvConfig,
    pub seed: u64,
}

impl PipelineConfig {
    /// Reads `path`, or the defaults when no path is given; `seed`
    /// overrides the file's seed.
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut cfg: Self = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => Self::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.svm.seed = mix_seed(cfg.seed, SVM_SALT);
        cfg.cv.seed = mix_seed(cfg.seed, CV_SALT);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cv.folds < 2 {
            bail!("folds must be >= 2, got {}", self.cv.folds);
        }
        self.aggregation.validate()?;
        for (name, agg) in &self.streams {
            agg.validate().with_context(|| format!("stream {name}"))?;
        }
        self.svm.validate()?;
        Ok(())
    }

    pub fn aggregation_for(&self, stream: &str) -> &AggregationConfig {
        self.streams.get(stream).unwrap_or(&self.aggregation)
    }

    /// Streams to aggregate, given those present in the data.
    pub fn select_streams(&self, available: &[String]) -> Result<Vec<String>> {
        let selected: Vec<String> = if self.streams.is_empty() {
            available.to_vec()
        } else {
            for name in self.streams.keys() {
                if !available.contains(name) {
                    bail!("configured stream {name:?} is not in the manifest");
                }
            }
            self.streams.keys().cloned().collect()
        };
        if selected.is_empty() {
            bail!("no streams configured");
        }
        Ok(selected)
    }
}
