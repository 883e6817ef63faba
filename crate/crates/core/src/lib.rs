//! Room impulse response tooling for reverberant anti-spoofing experiments:
//! RIR analysis (early/late split, DRR, T60), synthesis of RIRs with target
//! acoustics, image-source room simulation, fast-convolution reverberation,
//! evaluation-set and augmentation builders, and detector score metrics.

pub mod analysis;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod pipeline;
pub mod reverb;
pub mod rng;
pub mod room;
pub mod synthesis;
pub mod wave;

pub use error::{Error, Result};
