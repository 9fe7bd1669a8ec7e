//! JSON experiment config read by the CLI.
//!
//! Every block and every field is optional; missing values take the
//! defaults of the owning module. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentSpec;
use crate::error::{Error, Result};
use crate::infer::InferenceConfig;
use crate::labeling::LabelConfig;
use crate::nn::{AdamConfig, ArchName};
use crate::signal::NormalizationSpec;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub name: ArchName,
    pub window_len: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig { name: ArchName::Tan, window_len: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainBlock {
    pub batch_size: usize,
    pub epochs: usize,
    pub split_fraction: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainBlock {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainBlock { batch_size: t.batch_size, epochs: t.epochs, split_fraction: t.split_fraction, seed: t.seed, adam: t.adam }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub normalization: NormalizationSpec,
    pub labels: LabelConfig,
    pub augment: AugmentSpec,
    pub arch: ArchConfig,
    pub train: TrainBlock,
    pub inference: InferenceConfig,
}

impl CliConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Training settings; the output locations live outside the config.
    pub fn train_config(&self, checkpoint_dir: Option<PathBuf>, metrics_path: Option<PathBuf>, workers: usize) -> TrainConfig {
        TrainConfig {
            arch: self.arch.name,
            window_len: self.arch.window_len,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            adam: self.train.adam,
            normalization: self.normalization,
            labels: self.labels,
            augment: self.augment.clone(),
            split_fraction: self.train.split_fraction,
            seed: self.train.seed,
            checkpoint_dir,
            metrics_path,
            workers,
        }
    }
}
