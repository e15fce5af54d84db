//! Gated inference engine.
//!
//! The audio path runs a cheap activity detector on every segment and only
//! invokes the species classifier when `p_bird ≥ gate_threshold`. The image
//! path localizes the bird with a generic detector before classifying the
//! padded crop. Neural models sit behind [`ModelBackend`] /
//! [`ObjectDetector`]; [`stubs`] provides deterministic stand-ins.

mod backend;
mod gate;
mod image;
mod pipeline;
mod segment;
pub mod stubs;

pub use backend::{validate_probabilities, BackendError, BackendIdentity, ModelBackend, ModelInput, ObjectDetector};
pub use gate::{classify_species, gate, GateDecision};
pub use image::{image_tensor, run_image_pipeline, RgbImage, IMAGENET_MEAN, IMAGENET_STD};
pub use pipeline::{run_audio_pipeline, AudioPipeline, DutyCycleStats, SegmentOutcome};
pub use segment::{SampleSource, Segment, Segmenter, SliceSource, SourceError};

use alloc::string::String;
use alloc::vec::Vec;

use crate::audio::AudioError;
use crate::dataset::CropRules;
use crate::detection::Sighting;

/// Thresholds and segmentation of the runtime pipelines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Segments with `p_bird ≥` this value reach the species classifier.
    pub gate_threshold: f64,
    /// Audio records are emitted when the top probability is strictly above this.
    pub species_report_threshold: f64,
    /// Image records are emitted when the top probability is strictly above this.
    pub image_report_threshold: f64,
    /// Segment length in seconds.
    pub segment_seconds: f64,
    /// Segment advance in seconds.
    pub segment_hop_seconds: f64,
    /// Fractional box growth before cropping.
    pub pad_fraction: f64,
    /// Bird crop selection thresholds.
    pub crop_rules: CropRules,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gate_threshold: 0.80,
            species_report_threshold: 0.15,
            image_report_threshold: 0.2,
            segment_seconds: 3.0,
            segment_hop_seconds: 3.0,
            pad_fraction: 0.15,
            crop_rules: CropRules::default(),
        }
    }
}

impl PipelineConfig {
    /// Checks threshold ranges and segment geometry.
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, v) in [
            ("gate_threshold", self.gate_threshold),
            ("species_report_threshold", self.species_report_threshold),
            ("image_report_threshold", self.image_report_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PipelineError::Config(alloc::format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.segment_seconds > 0.0 && self.segment_seconds.is_finite()) {
            return Err(PipelineError::Config("segment_seconds must be positive".into()));
        }
        if !(self.segment_hop_seconds > 0.0 && self.segment_hop_seconds <= self.segment_seconds) {
            return Err(PipelineError::Config("segment_hop_seconds must be in (0, segment_seconds]".into()));
        }
        if !(self.pad_fraction >= 0.0 && self.pad_fraction.is_finite()) {
            return Err(PipelineError::Config("pad_fraction must be non-negative".into()));
        }
        Ok(())
    }
}

/// Source of wall-clock timestamps (UTC milliseconds).
pub trait Clock {
    /// Current time.
    fn now_ms(&self) -> i64;
}

/// A clock stuck at one instant.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedClock(pub i64);

impl Clock for FixedClock {
    fn now_ms(&self) -> i64 {
        self.0
    }
}

/// Receiver of emitted sightings.
pub trait DetectionSink {
    /// Takes one sighting.
    fn deliver(&mut self, sighting: Sighting);
}

impl DetectionSink for Vec<Sighting> {
    fn deliver(&mut self, sighting: Sighting) {
        self.push(sighting);
    }
}

impl<S: DetectionSink + ?Sized> DetectionSink for &mut S {
    fn deliver(&mut self, sighting: Sighting) {
        (**self).deliver(sighting);
    }
}

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    /// Invalid configuration, detected before any work starts.
    #[error("configuration error: {0}")]
    Config(String),
    /// Audio source failure.
    #[error(transparent)]
    Source(#[from] SourceError),
    /// Feature extraction failure.
    #[error(transparent)]
    Audio(#[from] AudioError),
    /// Model backend failure.
    #[error(transparent)]
    Backend(#[from] BackendError),
    /// Unusable input (e.g. empty image).
    #[error("input error: {0}")]
    Input(String),
}
