//! Embedding network, softmax head and nearest-class-mean inference.
//!
//! The network is `x -> relu(x W1 + b1) W2 + b2 = e -> e Wc + bc = logits`.
//! `e` is the embedding used for prototypes. Gradients are written out by
//! hand; the scalar type is generic so that tests can run in `f64`.

use std::fmt::Debug;
use std::io::{Read, Write};
use std::ops::AddAssign;

use num_traits::Float;

use crate::assembly::{pad_to, upsample_raster, ReconstructedImage};
use crate::buffer::{BufferMode, ReplayBuffer};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::Rng;

pub trait Scalar: Float + AddAssign + std::iter::Sum + Debug + Send + Sync + 'static {
    fn of(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite f64 converts")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDims {
    pub input: usize,
    pub hidden: usize,
    pub embed: usize,
    pub classes: usize,
}

impl LayerDims {
    pub const DEFAULT_HIDDEN: usize = 128;
    pub const DEFAULT_EMBED: usize = 64;

    pub fn for_images(resolution: usize, channels: usize, classes: usize) -> Self {
        Self {
            input: resolution * resolution * channels,
            hidden: Self::DEFAULT_HIDDEN,
            embed: Self::DEFAULT_EMBED,
            classes,
        }
    }
}

/// All trainable tensors, row-major. `w1` is `input x hidden`, `w2` is
/// `hidden x embed`, `wc` is `embed x classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub dims: LayerDims,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
    pub wc: Vec<T>,
    pub bc: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(dims: LayerDims) -> Self {
        let z = |n| vec![T::zero(); n];
        Self {
            dims,
            w1: z(dims.input * dims.hidden),
            b1: z(dims.hidden),
            w2: z(dims.hidden * dims.embed),
            b2: z(dims.embed),
            wc: z(dims.embed * dims.classes),
            bc: z(dims.classes),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(dims: LayerDims, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(dims);
        let mut fill = |w: &mut [T], fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w {
                *v = T::of((2.0 * rng.unit_f64() - 1.0) * bound);
            }
        };
        fill(&mut p.w1, dims.input, dims.hidden);
        fill(&mut p.w2, dims.hidden, dims.embed);
        fill(&mut p.wc, dims.embed, dims.classes);
        p
    }

    pub fn tensors(&self) -> [&Vec<T>; 6] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.wc, &self.bc]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 6] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2, &mut self.wc, &mut self.bc]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    // Checkpoint: "GPSM" | u32 LE input, hidden, embed, classes | w1 b1 w2 b2 wc bc as f32 LE.

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        let d = self.dims;
        for dim in [d.input, d.hidden, d.embed, d.classes] {
            w.write_all(&(dim as u32).to_le_bytes())?;
        }
        for t in self.tensors() {
            for &v in t {
                w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 20];
        r.read_exact(&mut header)
            .map_err(|_| Error::format("truncated checkpoint header"))?;
        if &header[..4] != CHECKPOINT_MAGIC {
            return Err(Error::format("bad checkpoint magic"));
        }
        let dim = |k: usize| u32::from_le_bytes(header[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
        let dims = LayerDims { input: dim(0), hidden: dim(1), embed: dim(2), classes: dim(3) };
        let mut p = Self::zeros(dims);
        for t in p.tensors_mut() {
            let mut raw = vec![0u8; t.len() * 4];
            r.read_exact(&mut raw)
                .map_err(|_| Error::format("truncated checkpoint tensor"))?;
            for (v, b) in t.iter_mut().zip(raw.chunks_exact(4)) {
                *v = T::of(f32::from_le_bytes(b.try_into().unwrap()) as f64);
            }
        }
        Ok(p)
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GPSM";

/// Gradient of the training objective, same layout as [`ModelParams`].
pub type Gradients<T> = ModelParams<T>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStepReport {
    /// `stream_loss + lambda * replay_loss`.
    pub combined: f64,
    pub stream_loss: f64,
    pub replay_loss: f64,
    pub lambda: f64,
    pub stream_size: usize,
    pub replay_size: usize,
}

/// Per-sample activations kept for the backward pass.
struct Trace<T> {
    hidden_pre: Vec<T>,
    hidden: Vec<T>,
    embedding: Vec<T>,
    logits: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Learner<T> {
    pub params: ModelParams<T>,
    resolution: usize,
    channels: usize,
    normalize_embeddings: bool,
    steps: u64,
}

impl<T: Scalar> Learner<T> {
    pub fn new(params: ModelParams<T>, resolution: usize, channels: usize) -> Result<Self> {
        if params.dims.input != resolution * resolution * channels {
            return Err(Error::config(format!(
                "network input {} does not match {resolution}x{resolution}x{channels} images",
                params.dims.input
            )));
        }
        if params.dims.classes == 0 {
            return Err(Error::config("network needs at least one class"));
        }
        Ok(Self { params, resolution, channels, normalize_embeddings: false, steps: 0 })
    }

    /// Normalize embeddings to unit length before prototype averaging and
    /// NCM distance computation.
    pub fn with_normalized_embeddings(mut self, on: bool) -> Self {
        self.normalize_embeddings = on;
        self
    }

    pub fn normalizes_embeddings(&self) -> bool {
        self.normalize_embeddings
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dims(&self) -> LayerDims {
        self.params.dims
    }

    /// Number of training steps applied so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Pixel values scaled to `[0, 1]`, flattened row-major.
    pub fn input_vector(&self, x: &Image) -> Result<Vec<T>> {
        if x.side() != Some(self.resolution) || x.channels() != self.channels {
            return Err(Error::contract(format!(
                "input is {}x{}x{}, learner expects {r}x{r}x{c}",
                x.height(),
                x.width(),
                x.channels(),
                r = self.resolution,
                c = self.channels,
            )));
        }
        let scale = T::of(1.0 / 255.0);
        Ok(x.data().iter().map(|&v| T::of(v as f64) * scale).collect())
    }

    fn trace(&self, input: &[T]) -> Trace<T> {
        let p = &self.params;
        let d = p.dims;

        let mut hidden_pre = p.b1.clone();
        for (i, &xi) in input.iter().enumerate() {
            if xi != T::zero() {
                let row = &p.w1[i * d.hidden..(i + 1) * d.hidden];
                for (h, &w) in hidden_pre.iter_mut().zip(row) {
                    *h += xi * w;
                }
            }
        }
        let hidden: Vec<T> = hidden_pre.iter().map(|&v| v.max(T::zero())).collect();

        let mut embedding = p.b2.clone();
        for (j, &hj) in hidden.iter().enumerate() {
            if hj != T::zero() {
                let row = &p.w2[j * d.embed..(j + 1) * d.embed];
                for (e, &w) in embedding.iter_mut().zip(row) {
                    *e += hj * w;
                }
            }
        }

        let mut logits = p.bc.clone();
        for (k, &ek) in embedding.iter().enumerate() {
            let row = &p.wc[k * d.classes..(k + 1) * d.classes];
            for (l, &w) in logits.iter_mut().zip(row) {
                *l += ek * w;
            }
        }
        Trace { hidden_pre, hidden, embedding, logits }
    }

    /// Embedding and class logits for one image.
    pub fn forward(&self, x: &Image) -> Result<(Vec<T>, Vec<T>)> {
        let t = self.trace(&self.input_vector(x)?);
        Ok((t.embedding, t.logits))
    }

    /// Embedding as used by NCM (unit-normalized when configured).
    pub fn embed(&self, x: &Image) -> Result<Vec<T>> {
        let mut e = self.trace(&self.input_vector(x)?).embedding;
        if self.normalize_embeddings {
            normalize(&mut e);
        }
        Ok(e)
    }

    /// Softmax-head prediction; ties go to the smaller class id.
    pub fn predict_softmax(&self, x: &Image) -> Result<u32> {
        let (_, logits) = self.forward(x)?;
        let mut best = 0;
        for (c, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = c;
            }
        }
        Ok(best as u32)
    }

    fn check_label(&self, label: Option<u32>) -> Result<usize> {
        let label = label.ok_or_else(|| Error::contract("training image has no label"))? as usize;
        if label >= self.params.dims.classes {
            return Err(Error::contract(format!(
                "label {label} outside the {}-class head",
                self.params.dims.classes
            )));
        }
        Ok(label)
    }

    /// Adds `weight * d(CE)/d(params)` for one example into `grads`, returns the CE loss.
    fn accumulate(&self, input: &[T], label: usize, weight: T, grads: &mut Gradients<T>) -> T {
        let p = &self.params;
        let d = p.dims;
        let t = self.trace(input);

        let max = t.logits.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = t.logits.iter().map(|&l| (l - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        let loss = total.ln() + max - t.logits[label];

        let mut d_logits: Vec<T> = exps.iter().map(|&e| e / total * weight).collect();
        d_logits[label] = d_logits[label] - weight;

        let mut d_embed = vec![T::zero(); d.embed];
        for (k, &ek) in t.embedding.iter().enumerate() {
            let row = &p.wc[k * d.classes..(k + 1) * d.classes];
            let grow = &mut grads.wc[k * d.classes..(k + 1) * d.classes];
            let mut acc = T::zero();
            for c in 0..d.classes {
                grow[c] += ek * d_logits[c];
                acc += row[c] * d_logits[c];
            }
            d_embed[k] = acc;
        }
        for (g, &dl) in grads.bc.iter_mut().zip(&d_logits) {
            *g += dl;
        }

        let mut d_hidden = vec![T::zero(); d.hidden];
        for (j, &hj) in t.hidden.iter().enumerate() {
            let row = &p.w2[j * d.embed..(j + 1) * d.embed];
            let grow = &mut grads.w2[j * d.embed..(j + 1) * d.embed];
            let mut acc = T::zero();
            for k in 0..d.embed {
                grow[k] += hj * d_embed[k];
                acc += row[k] * d_embed[k];
            }
            d_hidden[j] = if t.hidden_pre[j] > T::zero() { acc } else { T::zero() };
        }
        for (g, &de) in grads.b2.iter_mut().zip(&d_embed) {
            *g += de;
        }

        for (i, &xi) in input.iter().enumerate() {
            if xi != T::zero() {
                let grow = &mut grads.w1[i * d.hidden..(i + 1) * d.hidden];
                for (g, &dh) in grow.iter_mut().zip(&d_hidden) {
                    *g += xi * dh;
                }
            }
        }
        for (g, &dh) in grads.b1.iter_mut().zip(&d_hidden) {
            *g += dh;
        }
        loss
    }

    /// Loss and gradient of `mean CE(stream) + lambda * mean CE(replay)`
    /// without touching the parameters.
    ///
    /// With `lambda = 0` the replay batch contributes nothing to the gradient.
    pub fn loss_and_gradients(
        &self,
        stream: &[Image],
        replay: &[ReconstructedImage],
        lambda: f64,
    ) -> Result<(TrainStepReport, Gradients<T>)> {
        if stream.is_empty() {
            return Err(Error::contract("stream batch is empty"));
        }
        let mut grads = Gradients::zeros(self.params.dims);

        let w = T::of(1.0 / stream.len() as f64);
        let mut stream_loss = 0.0;
        for x in stream {
            let label = self.check_label(x.label())?;
            let input = self.input_vector(x)?;
            stream_loss += self.accumulate(&input, label, w, &mut grads).as_f64();
        }
        stream_loss /= stream.len() as f64;

        let mut replay_loss = 0.0;
        if !replay.is_empty() {
            let w = T::of(lambda / replay.len() as f64);
            let mut scratch = (lambda == 0.0).then(|| Gradients::zeros(self.params.dims));
            for r in replay {
                let label = self.check_label(Some(r.label))?;
                let input = self.input_vector(&pad_to(&r.image, self.resolution)?)?;
                let target = scratch.as_mut().unwrap_or(&mut grads);
                replay_loss += self.accumulate(&input, label, w, target).as_f64();
            }
            replay_loss /= replay.len() as f64;
        }

        let report = TrainStepReport {
            combined: stream_loss + lambda * replay_loss,
            stream_loss,
            replay_loss,
            lambda,
            stream_size: stream.len(),
            replay_size: replay.len(),
        };
        Ok((report, grads))
    }

    /// One SGD step on the combined stream + replay objective.
    pub fn train_step(
        &mut self,
        stream: &[Image],
        replay: &[ReconstructedImage],
        lambda: f64,
        lr: f64,
    ) -> Result<TrainStepReport> {
        let step = self.steps;
        let (report, grads) = self.loss_and_gradients(stream, replay, lambda)?;
        if !report.combined.is_finite() {
            return Err(Error::Numerical { step, what: format!("loss is {}", report.combined) });
        }
        let lr = T::of(lr);
        for (p, g) in self.params.tensors_mut().into_iter().zip(grads.tensors()) {
            for (pv, &gv) in p.iter_mut().zip(g.iter()) {
                *pv = *pv - lr * gv;
            }
        }
        self.steps += 1;
        if !self.params.is_finite() {
            return Err(Error::Numerical { step, what: "non-finite parameters after update".into() });
        }
        Ok(report)
    }

    /// Class prototypes from the buffer: the mean embedding of each class's
    /// exemplars, GPS surrogates being upsampled first.
    pub fn ncm_prototypes(&self, buf: &ReplayBuffer) -> Result<Vec<Prototype<T>>> {
        if buf.is_empty() {
            return Err(Error::EmptyState("cannot build prototypes from an empty buffer".into()));
        }
        let factor = match buf.mode() {
            BufferMode::Full => 1,
            BufferMode::Gps { factor } => factor,
        };
        let mut out = Vec::new();
        for class in buf.classes() {
            let slots = buf.indices_for_class(class);
            let mut sum = vec![T::zero(); self.params.dims.embed];
            for &s in &slots {
                let stored = buf.get(s).expect("indexed slot is occupied");
                let e = if factor == 1 {
                    self.embed(stored)?
                } else {
                    self.embed(&pad_to(&upsample_raster(stored, factor), self.resolution)?)?
                };
                for (a, v) in sum.iter_mut().zip(e) {
                    *a += v;
                }
            }
            let n = T::of(slots.len() as f64);
            sum.iter_mut().for_each(|v| *v = *v / n);
            out.push(Prototype { class, mean: sum, support: slots.len() });
        }
        Ok(out)
    }

    pub fn ncm_classify(&self, prototypes: &[Prototype<T>], x: &Image) -> Result<u32> {
        let e = self.embed(x)?;
        nearest_prototype(prototypes, &e)
            .ok_or_else(|| Error::EmptyState("no prototypes to classify against".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype<T> {
    pub class: u32,
    pub mean: Vec<T>,
    pub support: usize,
}

/// Class of the prototype closest to `embedding` in Euclidean distance; ties
/// go to the smaller class id.
pub fn nearest_prototype<T: Scalar>(prototypes: &[Prototype<T>], embedding: &[T]) -> Option<u32> {
    let mut best: Option<(T, u32)> = None;
    for p in prototypes {
        let dist: T = p.mean.iter().zip(embedding).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let better = match best {
            None => true,
            Some((bd, bc)) => dist < bd || (dist == bd && p.class < bc),
        };
        if better {
            best = Some((dist, p.class));
        }
    }
    best.map(|(_, c)| c)
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    if norm > T::zero() {
        v.iter_mut().for_each(|x| *x = *x / norm);
    }
}

/// Softmax probabilities of a logit vector.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}
