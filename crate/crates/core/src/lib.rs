//! Core of the zwitscher edge bird monitor.
//!
//! Everything in this crate is a pure function of its inputs and only needs
//! `alloc`: the audio feature front-ends, the dataset curation rules, the
//! evaluation metrics, the gated inference engine and the detection ring
//! buffer. IO, persistence, the HTTP service and the CLI live in the
//! `zwitscher` crate.
//!
//! ```text
//! audio source -> segment -> activity features -> gate --(p >= 0.80)--> species features -> classifier -> sink
//! image        -> detector -> bird crop rules  -> pad -> center crop -> classifier -> sink
//! ```

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![deny(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;

pub mod audio;
pub mod dataset;
pub mod detection;
pub mod engine;
pub mod geometry;
mod math;
pub mod metrics;

pub use audio::{
    ActivityFeatures, AudioClip, AudioError, MelConfig, MelFeatures, NormalizedFeatures, QuantizedSpectrogram, SpecAugmentConfig,
};
pub use detection::{DetectionBuffer, DetectionRecord, Modality, Sighting};
pub use geometry::{iou, BoundingBox, ImageDims};
