//! Versioned TOML experiment configuration.
//!
//! Unknown keys are rejected at every level. Validation errors name the
//! offending field with its dotted path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gps_core::bench::{InferenceHead, SyntheticSpec};
use gps_core::BufferMode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub tasks: TaskConfig,
    pub buffer: BufferConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic {
        num_classes: usize,
        resolution: usize,
        #[serde(default = "default_channels")]
        channels: usize,
        train_per_class: usize,
        test_per_class: usize,
        noise: f64,
        #[serde(default)]
        pattern_seed: u64,
    },
    Cifar100 {
        train: PathBuf,
        test: PathBuf,
    },
    /// `<root>/train/<class id>/*.ppm` and `<root>/test/<class id>/*.ppm`.
    ImageDir {
        root: PathBuf,
    },
}

fn default_channels() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub count: usize,
    pub classes_per_task: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Full,
    Gps,
    /// No buffer at all: the fine-tune baseline.
    None,
}

impl std::str::FromStr for ModeName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(ModeName::Full),
            "gps" => Ok(ModeName::Gps),
            "none" => Ok(ModeName::None),
            other => Err(format!("unknown buffer mode `{other}` (expected full, gps or none)")),
        }
    }
}

impl std::fmt::Display for ModeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModeName::Full => "full",
            ModeName::Gps => "gps",
            ModeName::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferConfig {
    pub mode: ModeName,
    /// Pixel budget in full-resolution images.
    pub k: usize,
    #[serde(default = "default_factor")]
    pub f: usize,
}

fn default_factor() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayUnit {
    /// `replay_budget` counts stored exemplars; GPS mode draws `budget / f^2` mosaics.
    Samples,
    /// `replay_budget` counts replay images directly.
    Images,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub stream_batch: usize,
    pub replay_budget: usize,
    pub replay_unit: ReplayUnit,
    pub lr: f64,
    pub lambda: f64,
    pub hidden: usize,
    pub embed: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            stream_batch: 10,
            replay_budget: 100,
            replay_unit: ReplayUnit::Samples,
            lr: 0.1,
            lambda: 1.0,
            hidden: 128,
            embed: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadName {
    Ncm,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub head: HeadName,
    pub normalize: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { head: HeadName::Ncm, normalize: false }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.seeds.is_empty() {
            return Err(field("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(field("seeds", "seeds must be distinct"));
        }
        if let DatasetConfig::Synthetic { num_classes, resolution, channels, train_per_class, test_per_class, noise, .. } =
            self.dataset
        {
            if num_classes == 0 {
                return Err(field("dataset.num_classes", "must be at least 1"));
            }
            if resolution == 0 {
                return Err(field("dataset.resolution", "must be at least 1"));
            }
            if channels != 1 && channels != 3 {
                return Err(field("dataset.channels", "must be 1 or 3"));
            }
            if train_per_class == 0 {
                return Err(field("dataset.train_per_class", "must be at least 1"));
            }
            if test_per_class == 0 {
                return Err(field("dataset.test_per_class", "must be at least 1"));
            }
            if !(noise.is_finite() && noise >= 0.0) {
                return Err(field("dataset.noise", "must be finite and non-negative"));
            }
            if self.tasks.count * self.tasks.classes_per_task > num_classes {
                return Err(field("tasks.count", "tasks x classes_per_task exceeds dataset.num_classes"));
            }
        }
        if self.tasks.count == 0 {
            return Err(field("tasks.count", "must be at least 1"));
        }
        if self.tasks.classes_per_task == 0 {
            return Err(field("tasks.classes_per_task", "must be at least 1"));
        }
        if self.buffer.f == 0 {
            return Err(field("f", "sampling factor must be at least 1"));
        }
        if self.buffer.k == 0 {
            return Err(field("buffer.k", "must be at least 1"));
        }
        if let Some(r) = self.resolution() {
            if self.buffer.mode == ModeName::Gps && self.buffer.f >= r {
                return Err(field("f", format!("must be smaller than the resolution {r}")));
            }
        }
        let t = &self.training;
        if t.stream_batch == 0 {
            return Err(field("training.stream_batch", "must be at least 1"));
        }
        if t.replay_budget == 0 {
            return Err(field("training.replay_budget", "must be at least 1"));
        }
        if !(t.lr.is_finite() && t.lr > 0.0) {
            return Err(field("training.lr", "must be finite and positive"));
        }
        if !(t.lambda.is_finite() && t.lambda >= 0.0) {
            return Err(field("training.lambda", "must be finite and non-negative"));
        }
        if t.hidden == 0 {
            return Err(field("training.hidden", "must be at least 1"));
        }
        if t.embed == 0 {
            return Err(field("training.embed", "must be at least 1"));
        }
        if self.buffer.mode == ModeName::None && self.inference.head == HeadName::Ncm {
            return Err(field("inference.head", "ncm needs a buffer; use softmax with buffer.mode = \"none\""));
        }
        Ok(())
    }

    /// Input resolution, when known without reading data files.
    pub fn resolution(&self) -> Option<usize> {
        match self.dataset {
            DatasetConfig::Synthetic { resolution, .. } => Some(resolution),
            DatasetConfig::Cifar100 { .. } => Some(32),
            DatasetConfig::ImageDir { .. } => None,
        }
    }

    pub fn buffer_mode(&self) -> Option<BufferMode> {
        match self.buffer.mode {
            ModeName::Full => Some(BufferMode::Full),
            ModeName::Gps => Some(BufferMode::Gps { factor: self.buffer.f }),
            ModeName::None => None,
        }
    }

    /// Replay items drawn per step for the configured mode.
    pub fn replay_batch(&self) -> usize {
        let t = &self.training;
        match (self.buffer.mode, t.replay_unit) {
            (ModeName::Gps, ReplayUnit::Samples) => (t.replay_budget / (self.buffer.f * self.buffer.f)).max(1),
            _ => t.replay_budget,
        }
    }

    pub fn head(&self) -> InferenceHead {
        match self.inference.head {
            HeadName::Ncm => InferenceHead::Ncm,
            HeadName::Softmax => InferenceHead::Softmax,
        }
    }

    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        match self.dataset {
            DatasetConfig::Synthetic {
                num_classes,
                resolution,
                channels,
                train_per_class,
                test_per_class,
                noise,
                pattern_seed,
            } => Some(SyntheticSpec {
                num_classes,
                resolution,
                channels,
                train_per_class,
                test_per_class,
                noise,
                pattern_seed,
            }),
            _ => None,
        }
    }
}
