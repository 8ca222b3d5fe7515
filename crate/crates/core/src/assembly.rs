//! Turning buffered surrogates back into full-size inputs.
//!
//! Training consumes mosaics of `f^2` same-class surrogates ([`grid_concat`]);
//! NCM inference consumes single surrogates blown up by pixel repetition
//! ([`upsample`]).

use crate::buffer::{BufferMode, ReplayBuffer};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::Rng;
use crate::sampler::GpsSample;

/// A training input assembled from buffer contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconstructedImage {
    pub image: Image,
    pub label: u32,
    /// Source slots in grid order (row-major over the `f x f` mosaic). When
    /// built directly by [`grid_concat`] these are positions in the input list.
    pub constituents: Vec<usize>,
}

/// Tiles `f^2` equally sized surrogates into an `f x f` mosaic; part `k` lands
/// in grid cell `(k / f, k % f)`.
pub fn grid_concat(parts: &[GpsSample], factor: usize) -> Result<ReconstructedImage> {
    let images: Vec<&Image> = parts.iter().map(GpsSample::image).collect();
    let (image, label) = tile(&images, factor)?;
    Ok(ReconstructedImage { image, label, constituents: (0..parts.len()).collect() })
}

fn tile(parts: &[&Image], factor: usize) -> Result<(Image, u32)> {
    if factor == 0 || parts.len() != factor * factor {
        return Err(Error::contract(format!(
            "grid_concat needs f^2 = {} parts, got {}",
            factor * factor,
            parts.len()
        )));
    }
    let first = parts[0];
    let side = first
        .side()
        .ok_or_else(|| Error::contract("grid_concat parts must be square"))?;
    if parts.iter().any(|p| !p.same_shape(first)) {
        return Err(Error::contract("mixed shapes"));
    }
    let label = first.label().ok_or_else(|| Error::contract("grid_concat part without label"))?;
    if parts.iter().any(|p| p.label() != Some(label)) {
        return Err(Error::contract("mixed labels"));
    }

    let c = first.channels();
    let out_side = side * factor;
    let row_bytes = side * c;
    let mut data = vec![0u8; out_side * out_side * c];
    for (k, part) in parts.iter().enumerate() {
        let (gi, gj) = (k / factor, k % factor);
        for row in 0..side {
            let dst = ((gi * side + row) * out_side + gj * side) * c;
            data[dst..dst + row_bytes].copy_from_slice(&part.data()[row * row_bytes..(row + 1) * row_bytes]);
        }
    }
    let image = Image::new(out_side, out_side, c, data)?.with_label(label);
    Ok((image, label))
}

/// Expands every surrogate pixel into an `f x f` block.
pub fn upsample(sample: &GpsSample) -> Image {
    let mut img = upsample_raster(sample.image(), sample.factor());
    img.set_label(Some(sample.label()));
    img
}

pub fn upsample_raster(src: &Image, factor: usize) -> Image {
    let (h, w, c) = (src.height(), src.width(), src.channels());
    let out_w = w * factor;
    let mut data = Vec::with_capacity(h * factor * out_w * c);
    for row in 0..h {
        let start = data.len();
        for col in 0..w {
            let px = src.pixel(row, col);
            for _ in 0..factor {
                data.extend_from_slice(px);
            }
        }
        for _ in 1..factor {
            data.extend_from_within(start..start + out_w * c);
        }
    }
    let mut out = Image::new(h * factor, out_w, c, data).expect("upsampled dimensions are consistent");
    out.set_label(src.label());
    out
}

/// Zero-pads a square image on the bottom and right up to `resolution`.
///
/// Reconstructions of surrogates taken with a factor that does not divide `r`
/// come out `f * r'` wide; the missing border is the region sampling never
/// reads.
pub fn pad_to(image: &Image, resolution: usize) -> Result<Image> {
    let side = image
        .side()
        .ok_or_else(|| Error::contract("pad_to expects a square image"))?;
    if side == resolution {
        return Ok(image.clone());
    }
    if side > resolution {
        return Err(Error::contract(format!("image side {side} exceeds target {resolution}")));
    }
    let c = image.channels();
    let mut data = vec![0u8; resolution * resolution * c];
    for row in 0..side {
        let dst = row * resolution * c;
        data[dst..dst + side * c].copy_from_slice(&image.data()[row * side * c..(row + 1) * side * c]);
    }
    let mut out = Image::new(resolution, resolution, c, data)?;
    out.set_label(image.label());
    Ok(out)
}

/// Draws up to `k` same-class mosaics from a GPS-mode buffer.
///
/// For every class with at least `f^2` exemplars the slot list is shuffled
/// and cut into consecutive groups of `f^2`; the incomplete tail is dropped.
/// Groups from all classes are pooled and `min(k, pool)` of them are drawn
/// without replacement.
pub fn draw_replay_batch(buf: &ReplayBuffer, k: usize, rng: &mut Rng) -> Result<Vec<ReconstructedImage>> {
    let BufferMode::Gps { factor } = buf.mode() else {
        return Err(Error::contract("draw_replay_batch requires a GPS-mode buffer"));
    };
    let group = factor * factor;
    let mut pool: Vec<Vec<usize>> = Vec::new();
    for class in buf.classes() {
        let mut slots = buf.indices_for_class(class);
        if slots.len() < group {
            continue;
        }
        rng.shuffle(&mut slots);
        pool.extend(slots.chunks_exact(group).map(<[usize]>::to_vec));
    }
    let take = k.min(pool.len());
    partial_shuffle(&mut pool, take, rng);
    pool.truncate(take);

    pool.into_iter()
        .map(|slots| {
            let parts: Vec<&Image> = slots.iter().map(|&s| buf.get(s).expect("indexed slot is occupied")).collect();
            let (image, label) = tile(&parts, factor)?;
            Ok(ReconstructedImage { image, label, constituents: slots })
        })
        .collect()
}

/// Plain experience-replay draw: `min(k, occupancy)` stored images, uniformly
/// without replacement. Works for any buffer mode; in GPS mode the stored
/// surrogates are returned upsampled.
pub fn draw_plain_batch(buf: &ReplayBuffer, k: usize, rng: &mut Rng) -> Vec<ReconstructedImage> {
    let mut slots: Vec<usize> = buf.occupied_slots().map(|(i, _)| i).collect();
    let take = k.min(slots.len());
    partial_shuffle(&mut slots, take, rng);
    slots.truncate(take);
    let factor = buf.mode().factor();
    slots
        .into_iter()
        .map(|s| {
            let stored = buf.get(s).expect("occupied");
            let image = if factor == 1 { stored.clone() } else { upsample_raster(stored, factor) };
            let label = stored.label().expect("stored items are labelled");
            ReconstructedImage { image, label, constituents: vec![s] }
        })
        .collect()
}

/// Moves a uniform random `take`-subset of `items` to the front.
fn partial_shuffle<T>(items: &mut [T], take: usize, rng: &mut Rng) {
    for i in 0..take {
        let j = i + rng.below_usize(items.len() - i);
        items.swap(i, j);
    }
}
