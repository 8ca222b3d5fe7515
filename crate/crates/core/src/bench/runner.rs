//! Single-pass online training and per-task evaluation.

use crate::assembly::{draw_plain_batch, draw_replay_batch, ReconstructedImage};
use crate::buffer::{BufferMode, ReplayBuffer};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::learner::{Learner, Scalar};
use crate::rng::{streams, Rng};
use crate::sampler::gps_sample;

use super::metrics::AccuracyMatrix;
use super::stream::TaskStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceHead {
    /// Nearest class mean over buffer exemplars.
    Ncm,
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub stream_batch: usize,
    /// Replay items per step: mosaics in GPS mode, stored images in FULL mode.
    pub replay_batch: usize,
    pub lambda: f64,
    pub lr: f64,
    pub head: InferenceHead,
    /// Root of the replay-draw and per-item sampling streams.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { stream_batch: 10, replay_batch: 25, lambda: 1.0, lr: 0.1, head: InferenceHead::Ncm, seed: 0 }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    /// Complete unless `failure` is set.
    pub matrix: AccuracyMatrix,
    /// How many times each training item was consumed, per task.
    pub visits: Vec<Vec<u32>>,
    /// Items offered to the buffer.
    pub offers: u64,
    pub steps: u64,
    /// Mean combined loss of the last training step of every task.
    pub final_losses: Vec<f64>,
    pub failure: Option<Error>,
}

impl RunOutcome {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.matrix.is_complete()
    }
}

fn check_compatible<T: Scalar>(stream: &TaskStream, learner: &Learner<T>, buffer: Option<&ReplayBuffer>, cfg: &RunConfig) -> Result<()> {
    if cfg.stream_batch == 0 {
        return Err(Error::config("stream batch size must be at least 1"));
    }
    let r = learner.resolution();
    for (t, task) in stream.tasks.iter().enumerate() {
        if task.test.is_empty() {
            return Err(Error::config(format!("task {t} has no test images")));
        }
        if let Some(x) = task.train.iter().chain(&task.test).find(|x| x.side() != Some(r)) {
            return Err(Error::config(format!(
                "task {t} holds a {}x{} image, learner expects {r}x{r}",
                x.height(),
                x.width()
            )));
        }
    }
    if stream.class_span() > learner.dims().classes {
        return Err(Error::config(format!(
            "stream labels reach {}, head has {} classes",
            stream.class_span() - 1,
            learner.dims().classes
        )));
    }
    match buffer {
        Some(b) if b.budget().resolution() != r => Err(Error::config(format!(
            "buffer reference resolution {} differs from learner resolution {r}",
            b.budget().resolution()
        ))),
        None if cfg.head == InferenceHead::Ncm => {
            Err(Error::config("NCM inference needs a replay buffer"))
        }
        _ => Ok(()),
    }
}

fn draw(buffer: &ReplayBuffer, k: usize, rng: &mut Rng) -> Result<Vec<ReconstructedImage>> {
    match buffer.mode() {
        BufferMode::Gps { .. } => draw_replay_batch(buffer, k, rng),
        BufferMode::Full => Ok(draw_plain_batch(buffer, k, rng)),
    }
}

fn offer(buffer: &mut ReplayBuffer, x: &Image, index: u64, seed: u64) -> Result<()> {
    match buffer.mode() {
        BufferMode::Full => buffer.offer(x.clone())?,
        BufferMode::Gps { factor } => {
            let mut rng = Rng::derive(seed, &[streams::GPS, index]);
            buffer.offer_sample(gps_sample(x, factor, &mut rng)?)?
        }
    };
    Ok(())
}

fn accuracy<T: Scalar>(learner: &Learner<T>, buffer: Option<&ReplayBuffer>, head: InferenceHead, test: &[Image]) -> Result<f64> {
    let mut correct = 0usize;
    match head {
        InferenceHead::Softmax => {
            for x in test {
                correct += usize::from(Some(learner.predict_softmax(x)?) == x.label());
            }
        }
        InferenceHead::Ncm => {
            let buffer = buffer.ok_or_else(|| Error::config("NCM inference needs a replay buffer"))?;
            let prototypes = learner.ncm_prototypes(buffer)?;
            for x in test {
                correct += usize::from(Some(learner.ncm_classify(&prototypes, x)?) == x.label());
            }
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Runs the online protocol over `stream`.
///
/// Each stream batch is used for exactly one training step together with a
/// replay batch drawn from `buffer`, and is offered to the buffer afterwards
/// (surrogate-compressed in GPS mode). After every task the learner is
/// evaluated on the test sets of all tasks seen so far. Passing `None` for
/// the buffer gives the fine-tune baseline.
///
/// Configuration mismatches are returned as `Err`; failures during the run
/// are reported in [`RunOutcome::failure`] alongside the partial matrix.
pub fn run_online<T: Scalar>(
    stream: &TaskStream,
    learner: &mut Learner<T>,
    mut buffer: Option<&mut ReplayBuffer>,
    cfg: &RunConfig,
) -> Result<RunOutcome> {
    check_compatible(stream, learner, buffer.as_deref(), cfg)?;

    let mut out = RunOutcome {
        matrix: AccuracyMatrix::new(stream.len()),
        visits: stream.tasks.iter().map(|t| vec![0; t.train.len()]).collect(),
        offers: 0,
        steps: 0,
        final_losses: Vec::new(),
        failure: None,
    };
    let mut replay_rng = Rng::derive(cfg.seed, &[streams::REPLAY]);
    let mut index = 0u64;

    let result = (|| -> Result<()> {
        for (t, task) in stream.tasks.iter().enumerate() {
            let mut last_loss = f64::NAN;
            for (b, batch) in task.train.chunks(cfg.stream_batch).enumerate() {
                let base = b * cfg.stream_batch;
                for v in &mut out.visits[t][base..base + batch.len()] {
                    *v += 1;
                }
                let replay = match buffer.as_deref() {
                    Some(buf) if cfg.replay_batch > 0 => draw(buf, cfg.replay_batch, &mut replay_rng)?,
                    _ => Vec::new(),
                };
                let report = learner.train_step(batch, &replay, cfg.lambda, cfg.lr)?;
                out.steps += 1;
                last_loss = report.combined;
                if let Some(buf) = buffer.as_deref_mut() {
                    for x in batch {
                        offer(buf, x, index, cfg.seed)?;
                        out.offers += 1;
                        index += 1;
                    }
                } else {
                    index += batch.len() as u64;
                }
            }
            out.final_losses.push(last_loss);

            let row = stream.tasks[..=t]
                .iter()
                .map(|seen| accuracy(learner, buffer.as_deref(), cfg.head, &seen.test))
                .collect::<Result<Vec<_>>>()?;
            out.matrix.push_row(row)?;
        }
        Ok(())
    })();
    out.failure = result.err();
    Ok(out)
}
