//! Pixel-budgeted exemplar store with reservoir updates.
//!
//! Capacity is expressed as a pixel budget `K * r^2`: the space of `K`
//! full-resolution images. In GPS mode each slot holds an `r' x r'`
//! surrogate, so the same budget yields `K * f^2` slots.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::image::{GridSpec, Image};
use crate::rng::Rng;
use crate::sampler::GpsSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBudget {
    images: usize,
    resolution: usize,
}

impl PixelBudget {
    /// Budget equivalent to `images` full-resolution `resolution x resolution` images.
    pub fn new(images: usize, resolution: usize) -> Result<Self> {
        if images == 0 {
            return Err(Error::config("buffer size K must be at least 1"));
        }
        if resolution == 0 {
            return Err(Error::config("resolution r must be at least 1"));
        }
        Ok(Self { images, resolution })
    }

    /// Nominal full-resolution image count `K`.
    pub fn images(&self) -> usize {
        self.images
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn capacity_pixels(&self) -> usize {
        self.images * self.resolution * self.resolution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferMode {
    /// Stores stream images as-is.
    Full,
    /// Stores grid-sampled surrogates with the given factor.
    Gps { factor: usize },
}

impl BufferMode {
    pub fn factor(&self) -> usize {
        match *self {
            BufferMode::Full => 1,
            BufferMode::Gps { factor } => factor,
        }
    }
}

/// Result of offering one exemplar to the buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Offer {
    /// Slot the item now occupies, if it was kept.
    pub slot: Option<usize>,
    pub evicted: Option<Image>,
}

impl Offer {
    pub fn accepted(&self) -> bool {
        self.slot.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayBuffer {
    budget: PixelBudget,
    mode: BufferMode,
    slot_side: usize,
    channels: Option<usize>,
    slots: Vec<Option<Image>>,
    occupied: usize,
    seen: u64,
    class_index: BTreeMap<u32, BTreeSet<usize>>,
    rng: Rng,
}

impl ReplayBuffer {
    pub fn new(budget: PixelBudget, mode: BufferMode, rng: Rng) -> Result<Self> {
        let r = budget.resolution();
        let (slot_count, slot_side) = match mode {
            BufferMode::Full => (budget.images(), r),
            BufferMode::Gps { factor } => {
                if factor >= r {
                    return Err(Error::config(format!(
                        "factor f = {factor} must be smaller than resolution r = {r}"
                    )));
                }
                let grid = GridSpec::new(factor, r)?;
                (budget.images() * factor * factor, grid.side())
            }
        };
        Ok(Self {
            budget,
            mode,
            slot_side,
            channels: None,
            slots: vec![None; slot_count],
            occupied: 0,
            seen: 0,
            class_index: BTreeMap::new(),
            rng,
        })
    }

    pub fn budget(&self) -> PixelBudget {
        self.budget
    }

    pub fn mode(&self) -> BufferMode {
        self.mode
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Side length of the raster each slot holds (`r` or `r'`).
    pub fn slot_side(&self) -> usize {
        self.slot_side
    }

    pub fn channels(&self) -> Option<usize> {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.occupied
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    /// Number of offers made so far, accepted or not.
    pub fn seen_count(&self) -> u64 {
        self.seen
    }

    pub fn rng(&self) -> &Rng {
        &self.rng
    }

    pub fn used_pixels(&self) -> usize {
        self.slots.iter().flatten().map(Image::pixel_count).sum()
    }

    pub fn get(&self, slot: usize) -> Option<&Image> {
        self.slots.get(slot).and_then(Option::as_ref)
    }

    /// Slot contents as a [`GpsSample`]; `None` for empty slots or FULL mode.
    pub fn sample_at(&self, slot: usize) -> Option<GpsSample> {
        let BufferMode::Gps { factor } = self.mode else {
            return None;
        };
        let image = self.get(slot)?.clone();
        GpsSample::from_parts(image, factor, self.budget.resolution()).ok()
    }

    pub fn occupied_slots(&self) -> impl Iterator<Item = (usize, &Image)> {
        self.slots.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|img| (i, img)))
    }

    /// Occupied slots holding class `class`, in ascending slot order.
    pub fn indices_for_class(&self, class: u32) -> Vec<usize> {
        self.class_index
            .get(&class)
            .map(|set| set.iter().copied().collect())
            .unwrap_or_default()
    }

    /// Classes present in the buffer, ascending.
    pub fn classes(&self) -> Vec<u32> {
        self.class_index.keys().copied().collect()
    }

    pub fn class_counts(&self) -> BTreeMap<u32, usize> {
        self.class_index.iter().map(|(&c, s)| (c, s.len())).collect()
    }

    /// Offers one exemplar under reservoir sampling.
    ///
    /// `item` must already be in slot format: `r x r` in FULL mode, the
    /// `r' x r'` surrogate in GPS mode.
    pub fn offer(&mut self, item: Image) -> Result<Offer> {
        let label = item.label().ok_or_else(|| Error::contract("offered item has no label"))?;
        if item.side() != Some(self.slot_side) {
            return Err(Error::contract(format!(
                "offered item is {}x{}, buffer slots are {2}x{2}",
                item.height(),
                item.width(),
                self.slot_side
            )));
        }
        match self.channels {
            Some(c) if c != item.channels() => {
                return Err(Error::contract(format!(
                    "offered item has {} channels, buffer holds {c}",
                    item.channels()
                )))
            }
            _ => self.channels = Some(item.channels()),
        }

        let n = self.seen;
        self.seen += 1;
        let m = self.slots.len() as u64;
        let slot = if n < m {
            Some(n as usize)
        } else {
            let j = self.rng.below(n + 1);
            (j < m).then_some(j as usize)
        };
        let Some(slot) = slot else {
            return Ok(Offer { slot: None, evicted: None });
        };

        let evicted = self.slots[slot].take();
        if let Some(old) = &evicted {
            self.unindex(old.label().expect("stored items are labelled"), slot);
        } else {
            self.occupied += 1;
        }
        self.class_index.entry(label).or_default().insert(slot);
        self.slots[slot] = Some(item);
        Ok(Offer { slot: Some(slot), evicted })
    }

    /// Offers a surrogate, checking it was produced with this buffer's geometry.
    pub fn offer_sample(&mut self, sample: GpsSample) -> Result<Offer> {
        match self.mode {
            BufferMode::Gps { factor }
                if factor == sample.factor()
                    && sample.source_resolution() == self.budget.resolution() =>
            {
                self.offer(sample.into_image())
            }
            _ => Err(Error::contract(format!(
                "surrogate (f = {}, r = {}) does not match buffer mode {:?} at r = {}",
                sample.factor(),
                sample.source_resolution(),
                self.mode,
                self.budget.resolution()
            ))),
        }
    }

    fn unindex(&mut self, label: u32, slot: usize) {
        if let Some(set) = self.class_index.get_mut(&label) {
            set.remove(&slot);
            if set.is_empty() {
                self.class_index.remove(&label);
            }
        }
    }

    // -----------------------------------------------------------------------
    // Snapshot format (little-endian):
    //   "GPSB" | version u16 | mode u8 | channels u8 | f u32 | K u32 | r u32 |
    //   seen u64 | rng state u64 | slot count u32 |
    //   per slot: occupied u8 [ | label u32 | side*side*channels bytes ]

    pub fn snapshot(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + self.used_pixels() * self.channels.unwrap_or(1));
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.push(match self.mode {
            BufferMode::Full => 0,
            BufferMode::Gps { .. } => 1,
        });
        out.push(self.channels.unwrap_or(0) as u8);
        out.extend_from_slice(&(self.mode.factor() as u32).to_le_bytes());
        out.extend_from_slice(&(self.budget.images() as u32).to_le_bytes());
        out.extend_from_slice(&(self.budget.resolution() as u32).to_le_bytes());
        out.extend_from_slice(&self.seen.to_le_bytes());
        out.extend_from_slice(&self.rng.state().to_le_bytes());
        out.extend_from_slice(&(self.slots.len() as u32).to_le_bytes());
        for slot in &self.slots {
            match slot {
                None => out.push(0),
                Some(img) => {
                    out.push(1);
                    out.extend_from_slice(&img.label().unwrap_or(0).to_le_bytes());
                    out.extend_from_slice(img.data());
                }
            }
        }
        out
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4, "magic")? != SNAPSHOT_MAGIC {
            return Err(Error::format("bad snapshot magic"));
        }
        let version = r.u16("version")?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::format(format!("unsupported snapshot version {version}")));
        }
        let mode_byte = r.u8("mode")?;
        let channels = r.u8("channels")? as usize;
        let factor = r.u32("f")? as usize;
        let k = r.u32("K")? as usize;
        let res = r.u32("r")? as usize;
        let mode = match mode_byte {
            0 => BufferMode::Full,
            1 => BufferMode::Gps { factor },
            other => return Err(Error::format(format!("unknown buffer mode byte {other}"))),
        };
        let budget = PixelBudget::new(k, res).map_err(|e| Error::format(e.to_string()))?;
        let seen = r.u64("seen_count")?;
        let rng = Rng::from_state(r.u64("rng state")?);
        let mut buf = Self::new(budget, mode, rng).map_err(|e| Error::format(e.to_string()))?;
        let slot_count = r.u32("slot count")? as usize;
        if slot_count != buf.slots.len() {
            return Err(Error::format(format!(
                "slot count {slot_count} does not match mode (expected {})",
                buf.slots.len()
            )));
        }
        buf.seen = seen;
        if channels != 0 {
            buf.channels = Some(channels);
        }
        let side = buf.slot_side;
        for slot in 0..slot_count {
            match r.u8("occupied flag")? {
                0 => {}
                1 => {
                    if channels == 0 {
                        return Err(Error::format("occupied slot in snapshot without channel count"));
                    }
                    let label = r.u32("label")?;
                    let data = r.take(side * side * channels, "raster payload")?.to_vec();
                    let img = Image::new(side, side, channels, data)
                        .map_err(|e| Error::format(e.to_string()))?
                        .with_label(label);
                    buf.class_index.entry(label).or_default().insert(slot);
                    buf.slots[slot] = Some(img);
                    buf.occupied += 1;
                }
                other => return Err(Error::format(format!("bad occupied flag {other}"))),
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::format("trailing bytes after snapshot"));
        }
        if (buf.occupied as u64) > seen {
            return Err(Error::format("more occupied slots than offers seen"));
        }
        Ok(buf)
    }
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"GPSB";
pub const SNAPSHOT_VERSION: u16 = 1;

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(format!("truncated snapshot at {field}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, field: &str) -> Result<u8> {
        Ok(self.take(1, field)?[0])
    }

    fn u16(&mut self, field: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, field)?.try_into().unwrap()))
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u64(&mut self, field: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }
}
