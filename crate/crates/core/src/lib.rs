//! Replay engine for memory-constrained online class-incremental learning
//! built around grid-based patch sampling (GPS).
//!
//! Stream images are compressed into `floor(r / f)`-sided surrogates by
//! picking one random pixel from every `f x f` patch. A pixel-budgeted
//! reservoir buffer therefore holds `f^2` times more exemplars than a
//! full-resolution one. Surrogates are replayed as same-class mosaics during
//! training and upsampled by pixel repetition for nearest-class-mean
//! inference.

pub mod assembly;
pub mod bench;
pub mod buffer;
pub mod error;
pub mod image;
pub mod learner;
pub mod rng;
pub mod sampler;

pub use assembly::{draw_plain_batch, draw_replay_batch, grid_concat, upsample, ReconstructedImage};
pub use buffer::{BufferMode, Offer, PixelBudget, ReplayBuffer};
pub use error::{Error, Result};
pub use image::{GridSpec, Image, PatchRect};
pub use learner::{Learner, LayerDims, ModelParams, Prototype, TrainStepReport};
pub use rng::Rng;
pub use sampler::{expected_surrogate, gps_sample, GpsSample};
