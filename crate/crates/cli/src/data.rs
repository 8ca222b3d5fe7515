//! Dataset materialization for each configured source.

use std::path::Path;

use gps_core::bench::{generate_synthetic, load_cifar100, Dataset};
use gps_core::image::load_ppm;
use gps_core::rng::{streams, Rng};
use gps_core::Image;

use crate::config::{DatasetConfig, ExperimentConfig};
use crate::error::{CliError, Result};

/// Data shared by every seed of an experiment. File-backed sources are read
/// once; synthetic data is drawn per seed.
pub enum Source {
    Fixed(Dataset),
    Synthetic(gps_core::bench::SyntheticSpec),
}

impl Source {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        match &cfg.dataset {
            DatasetConfig::Synthetic { .. } => Ok(Source::Synthetic(cfg.synthetic_spec().expect("synthetic"))),
            DatasetConfig::Cifar100 { train, test } => Ok(Source::Fixed(Dataset {
                train: load_cifar100(train)?,
                test: load_cifar100(test)?,
            })),
            DatasetConfig::ImageDir { root } => Ok(Source::Fixed(Dataset {
                train: load_class_dirs(&root.join("train"))?,
                test: load_class_dirs(&root.join("test"))?,
            })),
        }
    }

    pub fn dataset(&self, seed: u64) -> Result<std::borrow::Cow<'_, Dataset>> {
        match self {
            Source::Fixed(d) => Ok(std::borrow::Cow::Borrowed(d)),
            Source::Synthetic(spec) => {
                let mut rng = Rng::derive(seed, &[streams::SYNTHETIC]);
                Ok(std::borrow::Cow::Owned(generate_synthetic(spec, &mut rng)?))
            }
        }
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| CliError::io(dir, e))?;
    out.sort();
    Ok(out)
}

/// Reads `<dir>/<class id>/*.ppm`, labelling each image with its directory name.
pub fn load_class_dirs(dir: &Path) -> Result<Vec<Image>> {
    let mut images = Vec::new();
    for class_dir in sorted_entries(dir)? {
        if !class_dir.is_dir() {
            continue;
        }
        let name = class_dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let label: u32 = name.parse().map_err(|_| {
            CliError::Core(gps_core::Error::Format(format!(
                "{}: class directories must be named by numeric class id",
                class_dir.display()
            )))
        })?;
        for file in sorted_entries(&class_dir)? {
            if file.extension().is_some_and(|e| e == "ppm") {
                images.push(load_ppm(&file)?.with_label(label));
            }
        }
    }
    Ok(images)
}
