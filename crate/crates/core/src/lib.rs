//! Pedestrian collision warning from raw pixels.
//!
//! The crate holds every piece of the experiment:
//!
//! - [`tensor`], [`ops`], [`init`], [`optim`], [`checkpoint`]: a small dense
//!   tensor library with hand-written forward/backward passes, He
//!   initialization, SGD with weight decay and a binary checkpoint format.
//! - [`model`]: the dual-branch warning network (prediction + segmentation
//!   sharing the two lowest convolutions) and its training loop.
//! - [`datagen`]: a deterministic synthetic street-scene generator with
//!   per-pixel labels and rule-derived warning labels, plus class balancing.
//! - [`hog`]: the detection-based baseline (HoG features, linear classifier,
//!   sliding-window detection, region-of-interest warning rule).
//! - [`eval`]: ROC curves, AUC, TPR at a fixed FPR and method comparison.

pub mod checkpoint;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod hog;
pub mod init;
pub mod model;
pub mod ops;
pub mod optim;
pub mod rng;
pub mod tensor;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{Parameter, Tensor};
