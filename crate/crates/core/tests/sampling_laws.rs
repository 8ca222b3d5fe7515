use gps_core::assembly::{grid_concat, upsample};
use gps_core::rng::Rng;
use gps_core::{expected_surrogate, gps_sample, GpsSample, GridSpec, Image};
use proptest::prelude::*;

fn random_image(side: usize, channels: usize, label: u32, rng: &mut Rng) -> Image {
    let data = (0..side * side * channels).map(|_| rng.below(256) as u8).collect();
    Image::new(side, side, channels, data).unwrap().with_label(label)
}

#[test]
fn shape_law_over_sweep() {
    let mut rng = Rng::new(1);
    for r in 8..=64 {
        let x = random_image(r, 1, 0, &mut rng);
        for f in 1..=8 {
            let s = gps_sample(&x, f, &mut rng).unwrap();
            assert_eq!(s.side(), r / f, "r={r} f={f}");
            assert_eq!(s.image().width(), r / f);
            if r % f == 0 {
                assert_eq!(x.pixel_count(), s.image().pixel_count() * f * f);
            }
        }
    }
}

/// Every sampled channel vector must occur inside its source patch.
fn assert_membership(x: &Image, s: &GpsSample) {
    let grid = GridSpec::new(s.factor(), s.source_resolution()).unwrap();
    for i in 0..grid.side() {
        for j in 0..grid.side() {
            let rect = grid.patch_bounds(i, j).unwrap();
            let got = s.image().pixel(i, j);
            let found = rect
                .rows
                .clone()
                .any(|row| rect.cols.clone().any(|col| x.pixel(row, col) == got));
            assert!(found, "cell ({i},{j}) value {got:?} not in its patch");
        }
    }
}

#[test]
fn membership_exhaustive() {
    let mut rng = Rng::new(2);
    for r in [8, 9, 13, 16, 21] {
        for f in 1..=6 {
            for c in [1, 3] {
                let x = random_image(r, c, 3, &mut rng);
                let s = gps_sample(&x, f, &mut rng).unwrap();
                assert_membership(&x, &s);
            }
        }
    }
}

#[test]
fn channels_are_sampled_jointly() {
    // Every pixel has a distinct colour, so a mixed-channel sample would match no single pixel.
    let mut data = Vec::new();
    for p in 0..64u32 {
        data.extend_from_slice(&[p as u8, (p * 3 % 256) as u8, (p * 7 % 256) as u8]);
    }
    let x = Image::new(8, 8, 3, data).unwrap().with_label(0);
    for seed in 0..50 {
        let s = gps_sample(&x, 4, &mut Rng::new(seed)).unwrap();
        assert_membership(&x, &s);
    }
}

#[test]
fn sample_mean_converges_to_patch_mean() {
    const N: usize = 10_000;
    let mut data_rng = Rng::new(3);
    for (side, f) in [(8, 2), (9, 3)] {
        let x = random_image(side, 3, 0, &mut data_rng);
        let expect = expected_surrogate(&x, f).unwrap();
        let mut sums = vec![0.0f64; expect.len()];
        for seed in 0..N as u64 {
            let s = gps_sample(&x, f, &mut Rng::derive(seed, &[5])).unwrap();
            for (acc, &v) in sums.iter_mut().zip(s.image().data()) {
                *acc += v as f64;
            }
        }
        let grid = GridSpec::new(f, side).unwrap();
        let c = x.channels();
        for i in 0..grid.side() {
            for j in 0..grid.side() {
                for ch in 0..c {
                    let k = (i * grid.side() + j) * c + ch;
                    let mu = expect[k];
                    let rect = grid.patch_bounds(i, j).unwrap();
                    let mut var = 0.0;
                    for row in rect.rows.clone() {
                        for col in rect.cols.clone() {
                            let d = x.pixel(row, col)[ch] as f64 - mu;
                            var += d * d;
                        }
                    }
                    let sigma = (var / (f * f) as f64).sqrt();
                    let mean = sums[k] / N as f64;
                    assert!(
                        (mean - mu).abs() <= 4.0 * sigma / (N as f64).sqrt(),
                        "cell ({i},{j},{ch}): {mean} vs {mu} (sigma {sigma})"
                    );
                }
            }
        }
    }
}

fn surrogate(side: usize, channels: usize, factor: usize, rng: &mut Rng) -> GpsSample {
    GpsSample::from_parts(random_image(side, channels, 4, rng), factor, side * factor).unwrap()
}

#[test]
fn upsample_then_sample_is_identity() {
    let mut data_rng = Rng::new(4);
    for f in [2, 3, 4] {
        for _ in 0..5 {
            let y = surrogate(1 + data_rng.below_usize(9), 3, f, &mut data_rng);
            let up = upsample(&y);
            for seed in 0..100 {
                let back = gps_sample(&up, f, &mut Rng::new(seed)).unwrap();
                assert_eq!(back, y);
            }
        }
    }
}

#[test]
fn upsample_scales_value_multiset() {
    let mut rng = Rng::new(5);
    for f in 1..=4 {
        let y = surrogate(5, 1, f, &mut rng);
        let up = upsample(&y);
        let mut before = [0usize; 256];
        let mut after = [0usize; 256];
        y.image().data().iter().for_each(|&v| before[v as usize] += 1);
        up.data().iter().for_each(|&v| after[v as usize] += 1);
        for v in 0..256 {
            assert_eq!(after[v], before[v] * f * f);
        }
    }
}

proptest! {
    #[test]
    fn placement_law(f in 1usize..=4, side in 1usize..=6, channels in prop::sample::select(vec![1usize, 3]), seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let parts: Vec<GpsSample> = (0..f * f).map(|_| surrogate(side, channels, f, &mut rng)).collect();
        let out = grid_concat(&parts, f).unwrap();
        prop_assert_eq!(out.image.height(), f * side);
        for (k, part) in parts.iter().enumerate() {
            let (gi, gj) = (k / f, k % f);
            for row in 0..side {
                for col in 0..side {
                    prop_assert_eq!(out.image.pixel(gi * side + row, gj * side + col), part.image().pixel(row, col));
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic(side in 2usize..=20, f in 1usize..=4, seed in any::<u64>()) {
        prop_assume!(f <= side);
        let x = random_image(side, 3, 1, &mut Rng::new(seed ^ 1));
        let a = gps_sample(&x, f, &mut Rng::new(seed)).unwrap();
        let b = gps_sample(&x, f, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}
