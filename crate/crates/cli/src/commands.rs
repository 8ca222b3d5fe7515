//! Demo and inspection subcommands that work on single files.

use std::fmt::Write as _;
use std::path::Path;

use gps_core::image::{load_ppm, save_ppm};
use gps_core::rng::{streams, Rng};
use gps_core::sampler::sample_raster;
use gps_core::{grid_concat, gps_sample, BufferMode, GpsSample, GridSpec, ReplayBuffer};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CompressStats {
    pub resolution: usize,
    pub side: usize,
    pub factor: usize,
    /// Source pixels over surrogate pixels; exactly `f^2` when `f` divides `r`.
    pub ratio: f64,
    pub dropped: usize,
}

impl std::fmt::Display for CompressStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "r={} r'={} f={} ratio={} dropped_pixels={}",
            self.resolution, self.side, self.factor, self.ratio, self.dropped
        )
    }
}

/// Writes the GPS surrogate of a square PPM.
pub fn compress(input: &Path, factor: usize, seed: u64, out: &Path) -> Result<CompressStats> {
    let img = load_ppm(input)?;
    let r = img.side().ok_or_else(|| {
        gps_core::Error::Config(format!("input is not square ({}x{})", img.height(), img.width()))
    })?;
    let grid = GridSpec::new(factor, r)?;
    let surrogate = sample_raster(&img, &grid, &mut Rng::derive(seed, &[streams::GPS, 0]));
    save_ppm(&surrogate, out)?;
    Ok(CompressStats {
        resolution: r,
        side: grid.side(),
        factor,
        ratio: (r * r) as f64 / (grid.side() * grid.side()) as f64,
        dropped: grid.dropped_pixels(),
    })
}

/// Where the `f^2` constituents of a mosaic come from.
pub enum ReconstructSource<'a> {
    /// A buffer snapshot; draws one same-class group.
    Snapshot { path: &'a Path, class: Option<u32> },
    /// `f^2` PPM images, each compressed with its own sampling stream.
    Images { paths: &'a [std::path::PathBuf], factor: usize },
}

/// Builds one mosaic and writes it as PPM. Returns a one-line description.
pub fn reconstruct(source: ReconstructSource<'_>, seed: u64, out: &Path) -> Result<String> {
    let mut rng = Rng::derive(seed, &[streams::REPLAY]);
    let (parts, factor, what) = match source {
        ReconstructSource::Snapshot { path, class } => {
            let buf = read_snapshot(path)?;
            let BufferMode::Gps { factor } = buf.mode() else {
                return Err(CliError::Usage("reconstruct needs a GPS-mode buffer snapshot".into()));
            };
            let group = factor * factor;
            let class = match class {
                Some(c) => c,
                None => buf
                    .classes()
                    .into_iter()
                    .find(|&c| buf.indices_for_class(c).len() >= group)
                    .ok_or_else(|| CliError::Usage(format!("no class holds {group} exemplars")))?,
            };
            let mut slots = buf.indices_for_class(class);
            if slots.len() < group {
                return Err(CliError::Usage(format!(
                    "class {class} holds {} exemplars, a mosaic needs {group}",
                    slots.len()
                )));
            }
            rng.shuffle(&mut slots);
            slots.truncate(group);
            let parts: Vec<GpsSample> = slots.iter().map(|&s| buf.sample_at(s).expect("occupied")).collect();
            (parts, factor, format!("class {class} slots {slots:?}"))
        }
        ReconstructSource::Images { paths, factor } => {
            if paths.len() != factor * factor {
                return Err(CliError::Usage(format!(
                    "f = {factor} needs {} input images, got {}",
                    factor * factor,
                    paths.len()
                )));
            }
            let parts = paths
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let img = load_ppm(p)?.with_label(0);
                    Ok(gps_sample(&img, factor, &mut Rng::derive(seed, &[streams::GPS, i as u64]))?)
                })
                .collect::<Result<Vec<_>>>()?;
            (parts, factor, format!("{} images", paths.len()))
        }
    };
    let mosaic = grid_concat(&parts, factor)?;
    save_ppm(&mosaic.image, out)?;
    Ok(format!(
        "wrote {}x{} mosaic from {what} to {}",
        mosaic.image.height(),
        mosaic.image.width(),
        out.display()
    ))
}

pub fn read_snapshot(path: &Path) -> Result<ReplayBuffer> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(ReplayBuffer::restore(&bytes)?)
}

/// Human-readable description of a buffer snapshot.
pub fn inspect(buf: &ReplayBuffer) -> String {
    let mut s = String::new();
    let (mode, f) = match buf.mode() {
        BufferMode::Full => ("full", 1),
        BufferMode::Gps { factor } => ("gps", factor),
    };
    let budget = buf.budget();
    writeln!(s, "mode: {mode}").unwrap();
    writeln!(s, "f: {f}").unwrap();
    writeln!(s, "K: {}", budget.images()).unwrap();
    writeln!(s, "resolution: {}", budget.resolution()).unwrap();
    writeln!(s, "slots: {}", buf.slot_count()).unwrap();
    writeln!(s, "slot side: {}", buf.slot_side()).unwrap();
    writeln!(s, "occupancy: {}", buf.len()).unwrap();
    writeln!(s, "seen: {}", buf.seen_count()).unwrap();
    writeln!(s, "pixels: {} / {}", buf.used_pixels(), budget.capacity_pixels()).unwrap();
    writeln!(s, "classes:").unwrap();
    for (class, count) in buf.class_counts() {
        writeln!(s, "  {class}: {count}").unwrap();
    }
    s
}
