//! Grid-based patch sampling.
//!
//! An `r x r` image is cut into an `r' x r'` grid of `f x f` patches and one
//! pixel is drawn uniformly from each patch. The chosen `(u, v)` offset is
//! independent per patch and shared by all channels of that pixel.

use crate::error::{Error, Result};
use crate::image::{GridSpec, Image};
use crate::rng::Rng;

/// Low-resolution surrogate of a labelled square image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GpsSample {
    image: Image,
    factor: usize,
    source_resolution: usize,
}

impl GpsSample {
    /// Wraps an already-compressed raster. `image` must be square with side
    /// `floor(source_resolution / factor)` and carry a label.
    pub fn from_parts(image: Image, factor: usize, source_resolution: usize) -> Result<Self> {
        let grid = GridSpec::new(factor, source_resolution)?;
        if image.side() != Some(grid.side()) {
            return Err(Error::contract(format!(
                "surrogate is {}x{}, expected side {}",
                image.height(),
                image.width(),
                grid.side()
            )));
        }
        if image.label().is_none() {
            return Err(Error::contract("surrogate has no label"));
        }
        Ok(Self { image, factor, source_resolution })
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn into_image(self) -> Image {
        self.image
    }

    pub fn label(&self) -> u32 {
        self.image.label().expect("GpsSample always carries a label")
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn source_resolution(&self) -> usize {
        self.source_resolution
    }

    /// Side `r'` of the surrogate.
    pub fn side(&self) -> usize {
        self.image.height()
    }
}

fn grid_for(x: &Image, factor: usize) -> Result<GridSpec> {
    let r = x
        .side()
        .ok_or_else(|| Error::config(format!("input is not square ({}x{})", x.height(), x.width())))?;
    GridSpec::new(factor, r)
}

/// Compresses `x` into an `r' x r'` surrogate by sampling one pixel per patch.
pub fn gps_sample(x: &Image, factor: usize, rng: &mut Rng) -> Result<GpsSample> {
    let label = x.label().ok_or_else(|| Error::contract("input image has no label"))?;
    let grid = grid_for(x, factor)?;
    let image = sample_raster(x, &grid, rng).with_label(label);
    Ok(GpsSample { image, factor, source_resolution: grid.resolution() })
}

/// The sampling transform alone, for unlabelled images.
pub fn sample_raster(x: &Image, grid: &GridSpec, rng: &mut Rng) -> Image {
    let (side, f, c) = (grid.side(), grid.factor(), x.channels());
    let mut data = Vec::with_capacity(side * side * c);
    for i in 0..side {
        for j in 0..side {
            let u = rng.below_usize(f);
            let v = rng.below_usize(f);
            data.extend_from_slice(x.pixel(i * f + u, j * f + v));
        }
    }
    Image::new(side, side, c, data).expect("surrogate dimensions are consistent")
}

/// Mean-valued surrogate: each cell is the per-channel mean of its patch.
///
/// This is the expectation of [`gps_sample`] over the sampling randomness.
/// Output is `r' * r' * C` values in the same interleaved layout as [`Image`].
pub fn expected_surrogate(x: &Image, factor: usize) -> Result<Vec<f64>> {
    let grid = grid_for(x, factor)?;
    let (side, f, c) = (grid.side(), factor, x.channels());
    let area = (f * f) as f64;
    let mut out = vec![0.0; side * side * c];
    for i in 0..side {
        for j in 0..side {
            let cell = &mut out[(i * side + j) * c..(i * side + j + 1) * c];
            for u in 0..f {
                for v in 0..f {
                    for (acc, &p) in cell.iter_mut().zip(x.pixel(i * f + u, j * f + v)) {
                        *acc += p as f64;
                    }
                }
            }
            cell.iter_mut().for_each(|a| *a /= area);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(side: usize, channels: usize, data: Vec<u8>) -> Image {
        Image::new(side, side, channels, data).unwrap().with_label(0)
    }

    #[test]
    fn mini_imagenet_resolution_halves() {
        let x = labelled(84, 3, vec![7; 84 * 84 * 3]);
        let s = gps_sample(&x, 2, &mut Rng::new(0)).unwrap();
        assert_eq!((s.image().height(), s.image().width()), (42, 42));
        assert_eq!((s.factor(), s.source_resolution(), s.label()), (2, 84, 0));
    }

    #[test]
    fn factor_one_is_identity() {
        let x = labelled(5, 3, (0..75).collect());
        let s = gps_sample(&x, 1, &mut Rng::new(11)).unwrap();
        assert_eq!(s.image(), &x);
    }

    #[test]
    fn constant_image_stays_constant() {
        let x = labelled(4, 1, vec![93; 16]);
        let s = gps_sample(&x, 2, &mut Rng::new(3)).unwrap();
        assert_eq!(s.image().data(), &[93; 4]);
    }

    #[test]
    fn rejects_non_square_and_oversized_factor() {
        let x = Image::new(4, 5, 1, vec![0; 20]).unwrap().with_label(1);
        assert!(matches!(gps_sample(&x, 2, &mut Rng::new(0)), Err(Error::Config(_))));
        let x = labelled(4, 1, vec![0; 16]);
        assert!(matches!(gps_sample(&x, 5, &mut Rng::new(0)), Err(Error::Config(_))));
        assert!(matches!(gps_sample(&x, 0, &mut Rng::new(0)), Err(Error::Config(_))));
    }

    #[test]
    fn unlabelled_input_is_rejected() {
        let x = Image::new(4, 4, 1, vec![0; 16]).unwrap();
        assert!(matches!(gps_sample(&x, 2, &mut Rng::new(0)), Err(Error::Contract(_))));
    }

    #[test]
    fn input_is_untouched_and_sampling_is_deterministic() {
        let x = labelled(8, 3, (0..192).map(|v| v as u8).collect());
        let copy = x.clone();
        let a = gps_sample(&x, 3, &mut Rng::new(77)).unwrap();
        let b = gps_sample(&x, 3, &mut Rng::new(77)).unwrap();
        assert_eq!(a, b);
        assert_eq!(x, copy);
    }

    #[test]
    fn expected_surrogate_examples() {
        let x = labelled(2, 1, vec![0, 0, 255, 255]);
        assert_eq!(expected_surrogate(&x, 2).unwrap(), vec![127.5]);

        let x = labelled(6, 3, vec![40; 108]);
        assert!(expected_surrogate(&x, 3).unwrap().iter().all(|&v| v == 40.0));

        // Brute force over the enumerated top-left patch {0, 1, 4, 5}.
        let x = labelled(4, 1, (0..16).collect());
        let patch = [0u8, 1, 4, 5];
        let brute = patch.iter().map(|&v| v as f64).sum::<f64>() / patch.len() as f64;
        assert_eq!(brute, 2.5);
        assert_eq!(expected_surrogate(&x, 2).unwrap()[0], brute);
    }
}
