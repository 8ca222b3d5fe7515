//! Dense 8-bit rasters, grid geometry and image file I/O.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major, channel-interleaved 8-bit raster with an optional class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
    label: Option<u32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::config(format!("unsupported channel count {channels}")));
        }
        if height == 0 || width == 0 {
            return Err(Error::config(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::contract(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self { height, width, channels, data, label: None })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn with_label(mut self, label: u32) -> Self {
        self.label = Some(label);
        self
    }

    pub fn set_label(&mut self, label: Option<u32>) {
        self.label = label;
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn label(&self) -> Option<u32> {
        self.label
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Number of pixel positions (not channel values).
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    /// Side length of a square image, or `None` when height and width differ.
    pub fn side(&self) -> Option<usize> {
        (self.height == self.width).then_some(self.height)
    }

    /// Channel vector of the pixel at `(row, col)`.
    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[u8] {
        let at = (row * self.width + col) * self.channels;
        &self.data[at..at + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [u8] {
        let at = (row * self.width + col) * self.channels;
        &mut self.data[at..at + self.channels]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }
}

/// Partition of an `r x r` image into `r' x r'` patches of side `f`, `r' = floor(r / f)`.
///
/// Rows and columns at index `r' * f` and beyond belong to no patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    factor: usize,
    resolution: usize,
    side: usize,
}

/// Half-open pixel rectangle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchRect {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

impl GridSpec {
    pub fn new(factor: usize, resolution: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::config("factor f must be at least 1"));
        }
        if factor > resolution {
            return Err(Error::config(format!(
                "factor f = {factor} is larger than resolution r = {resolution}"
            )));
        }
        Ok(Self { factor, resolution, side: resolution / factor })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Grid side `r'`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Pixels of the source image that fall outside every patch.
    pub fn dropped_pixels(&self) -> usize {
        let covered = self.side * self.factor;
        self.resolution * self.resolution - covered * covered
    }

    pub fn patch_bounds(&self, i: usize, j: usize) -> Result<PatchRect> {
        if i >= self.side || j >= self.side {
            return Err(Error::contract(format!(
                "patch ({i}, {j}) outside {0}x{0} grid",
                self.side
            )));
        }
        let f = self.factor;
        Ok(PatchRect { rows: i * f..(i + 1) * f, cols: j * f..(j + 1) * f })
    }
}

// ---------------------------------------------------------------------------
// PPM (P6)

fn is_ppm_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if is_ppm_space(b) {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(format!("malformed PPM header: missing {field}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(format!("malformed PPM header: {field} out of range")))
    }
}

/// Decodes a binary PPM (P6, maxval 255) held in memory.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::format("malformed PPM header: magic is not P6"));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::format(format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(format!("malformed PPM header: zero dimension {width}x{height}")));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(cur.pos) {
        Some(&b) if is_ppm_space(b) => cur.pos += 1,
        _ => return Err(Error::format("malformed PPM header: no separator after maxval")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::format("malformed PPM header: dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < need {
        return Err(Error::format(format!(
            "truncated pixel data: expected {need} bytes, found {}",
            payload.len()
        )));
    }
    Image::new(height, width, 3, payload[..need].to_vec())
}

pub fn encode_ppm(image: &Image) -> Result<Vec<u8>> {
    let rgb;
    let data = match image.channels() {
        3 => image.data(),
        _ => {
            rgb = image.data().iter().flat_map(|&v| [v, v, v]).collect::<Vec<_>>();
            &rgb
        }
    };
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(data);
    Ok(out)
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<Image> {
    decode_ppm(&std::fs::read(path)?)
}

/// Writes `image` as P6. Single-channel images are expanded to grey RGB.
pub fn save_ppm(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_ppm(image)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Raw tensor container: "GPSI" + u32 LE height, width, channels, then payload.

pub const TENSOR_MAGIC: &[u8; 4] = b"GPSI";

pub fn write_tensor<W: Write>(image: &Image, mut w: W) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    for dim in [image.height(), image.width(), image.channels()] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    w.write_all(image.data())?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<Image> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::format("truncated tensor header"))?;
    if &header[..4] != TENSOR_MAGIC {
        return Err(Error::format("bad tensor magic"));
    }
    let dim = |k: usize| u32::from_le_bytes(header[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (height, width, channels) = (dim(0), dim(1), dim(2));
    let mut data = vec![0u8; height * width * channels];
    r.read_exact(&mut data)
        .map_err(|_| Error::format("truncated tensor payload"))?;
    Image::new(height, width, channels, data).map_err(|e| Error::format(e.to_string()))
}
