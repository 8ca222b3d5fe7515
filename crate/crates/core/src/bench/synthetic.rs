//! Smooth-pattern synthetic classification data.
//!
//! Class `c` has a mean image made of a single low-frequency plane wave
//! (one spatial frequency per class, random phase per channel) over a
//! per-class brightness offset. Samples add i.i.d. Gaussian pixel noise and
//! are clipped to `[0, 255]`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::Rng;

use super::stream::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub resolution: usize,
    pub channels: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Standard deviation of the per-pixel noise, in 8-bit units.
    pub noise: f64,
    /// Seeds the class mean patterns, independently of sample noise.
    pub pattern_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 10,
            resolution: 32,
            channels: 3,
            train_per_class: 100,
            test_per_class: 50,
            noise: 48.0,
            pattern_seed: 0,
        }
    }
}

const AMPLITUDE: f64 = 60.0;
const OFFSET_SPREAD: f64 = 20.0;
const MAX_FREQ: i32 = 3;

/// Distinct spatial frequencies `(kx, ky)` up to `MAX_FREQ`, one per half-plane direction.
fn frequency_pool() -> Vec<(i32, i32)> {
    let mut pool = Vec::new();
    for kx in 0..=MAX_FREQ {
        for ky in -MAX_FREQ..=MAX_FREQ {
            if kx > 0 || ky > 0 {
                pool.push((kx, ky));
            }
        }
    }
    pool
}

struct ClassPattern {
    freq: (i32, i32),
    phases: Vec<f64>,
    offsets: Vec<f64>,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.resolution == 0 {
            return Err(Error::config("synthetic data needs at least one class and a positive resolution"));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::config(format!("unsupported channel count {}", self.channels)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config(format!("noise must be a finite non-negative value, got {}", self.noise)));
        }
        Ok(())
    }

    fn patterns(&self) -> Vec<ClassPattern> {
        let mut rng = Rng::derive(self.pattern_seed, &[crate::rng::streams::SYNTHETIC]);
        let mut pool = frequency_pool();
        rng.shuffle(&mut pool);
        (0..self.num_classes)
            .map(|c| ClassPattern {
                // Beyond the pool size frequencies repeat; phases still differ.
                freq: pool[c % pool.len()],
                phases: (0..self.channels).map(|_| rng.unit_f64() * TAU).collect(),
                offsets: (0..self.channels).map(|_| (2.0 * rng.unit_f64() - 1.0) * OFFSET_SPREAD).collect(),
            })
            .collect()
    }

    fn mean_values(&self, p: &ClassPattern) -> Vec<f64> {
        let r = self.resolution;
        let mut out = Vec::with_capacity(r * r * self.channels);
        for y in 0..r {
            for x in 0..r {
                let arg = TAU * (p.freq.0 as f64 * x as f64 + p.freq.1 as f64 * y as f64) / r as f64;
                for ch in 0..self.channels {
                    out.push(128.0 + p.offsets[ch] + AMPLITUDE * (arg + p.phases[ch]).cos());
                }
            }
        }
        out
    }
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// The noise-free image of `class`.
pub fn mean_pattern(spec: &SyntheticSpec, class: u32) -> Result<Image> {
    spec.validate()?;
    let patterns = spec.patterns();
    let p = patterns
        .get(class as usize)
        .ok_or_else(|| Error::contract(format!("class {class} outside {} classes", spec.num_classes)))?;
    let r = spec.resolution;
    let data = spec.mean_values(p).into_iter().map(quantize).collect();
    Ok(Image::new(r, r, spec.channels, data)?.with_label(class))
}

/// Draws the train and test splits. Class patterns depend only on
/// `spec.pattern_seed`; sample noise comes from `rng`.
pub fn generate_synthetic(spec: &SyntheticSpec, rng: &mut Rng) -> Result<Dataset> {
    spec.validate()?;
    let r = spec.resolution;
    let means: Vec<Vec<f64>> = spec.patterns().iter().map(|p| spec.mean_values(p)).collect();
    let draw = |count: usize, rng: &mut Rng| -> Result<Vec<Image>> {
        let mut out = Vec::with_capacity(count * means.len());
        for (c, mean) in means.iter().enumerate() {
            for _ in 0..count {
                let data = mean.iter().map(|&m| quantize(m + spec.noise * rng.gaussian())).collect();
                out.push(Image::new(r, r, spec.channels, data)?.with_label(c as u32));
            }
        }
        Ok(out)
    };
    let train = draw(spec.train_per_class, rng)?;
    let test = draw(spec.test_per_class, rng)?;
    Ok(Dataset { train, test })
}
