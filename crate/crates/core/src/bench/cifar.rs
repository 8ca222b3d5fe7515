//! CIFAR-100 binary format: each record is a coarse-label byte, a fine-label
//! byte and 3072 pixel bytes stored as three 32x32 planes (R, G, B).

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;
pub const CIFAR100_RECORD_BYTES: usize = 2 + 3 * PLANE;

/// Decodes a CIFAR-100 binary file. The fine label becomes the class id.
pub fn decode_cifar100(bytes: &[u8]) -> Result<Vec<Image>> {
    if !bytes.len().is_multiple_of(CIFAR100_RECORD_BYTES) {
        return Err(Error::format(format!(
            "CIFAR-100 file length {} is not a multiple of {CIFAR100_RECORD_BYTES}",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(CIFAR100_RECORD_BYTES)
        .map(|rec| {
            let fine = rec[1] as u32;
            let planes = &rec[2..];
            let mut data = Vec::with_capacity(3 * PLANE);
            for px in 0..PLANE {
                data.extend_from_slice(&[planes[px], planes[PLANE + px], planes[2 * PLANE + px]]);
            }
            Ok(Image::new(SIDE, SIDE, 3, data)?.with_label(fine))
        })
        .collect()
}

pub fn load_cifar100(path: impl AsRef<Path>) -> Result<Vec<Image>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    decode_cifar100(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_record_reinterleaved() {
        let mut rec = vec![3u8, 7];
        // R plane = pixel index mod 251, G = 100, B = 200.
        rec.extend((0..PLANE).map(|i| (i % 251) as u8));
        rec.extend(std::iter::repeat_n(100, PLANE));
        rec.extend(std::iter::repeat_n(200, PLANE));
        let imgs = decode_cifar100(&rec).unwrap();
        assert_eq!(imgs.len(), 1);
        let img = &imgs[0];
        assert_eq!(img.label(), Some(7));
        assert_eq!(img.pixel(0, 0), &[0, 100, 200]);
        assert_eq!(img.pixel(0, 5), &[5, 100, 200]);
        assert_eq!(img.pixel(10, 3), &[((10 * 32 + 3) % 251) as u8, 100, 200]);
    }

    #[test]
    fn empty_and_ragged_inputs() {
        assert!(decode_cifar100(&[]).unwrap().is_empty());
        assert!(matches!(decode_cifar100(&vec![0; 3073]), Err(Error::Format(_))));
    }
}
