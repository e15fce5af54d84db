use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::RgbImage;
use crate::audio::AudioClip;
use crate::dataset::Detection;

/// Name and version of a backend.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BackendIdentity {
    /// Model name.
    pub name: String,
    /// Version string.
    pub version: String,
}

impl BackendIdentity {
    /// New identity.
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        Self { name: name.into(), version: version.into() }
    }
}

/// One inference request.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    /// Flat feature tensor.
    pub tensor: &'a [f32],
    /// Its shape.
    pub shape: &'a [usize],
    /// The waveform the tensor was computed from, when there is one.
    pub waveform: Option<&'a AudioClip>,
}

/// Backend failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// The backend could not run.
    #[error("backend failed: {0}")]
    Failed(String),
    /// The backend produced output violating its contract.
    #[error("backend output invalid: {0}")]
    BadOutput(String),
    /// Input shape differs from the declared one.
    #[error("input shape {actual:?} does not match declared {expected:?}")]
    Shape {
        /// Declared shape.
        expected: Vec<usize>,
        /// Shape offered.
        actual: Vec<usize>,
    },
}

/// Tensor-in / probabilities-out model.
///
/// Classifier outputs are a probability vector; the activity detector
/// outputs a single `p_bird`. Implementations must be deterministic for a
/// fixed input.
pub trait ModelBackend {
    /// Name and version.
    fn identity(&self) -> BackendIdentity;

    /// Declared input shape; empty means "any".
    fn input_shape(&self) -> &[usize];

    /// Length of the output vector when known up front.
    fn output_len(&self) -> Option<usize>;

    /// Runs the model.
    fn infer(&mut self, input: &ModelInput<'_>) -> Result<Vec<f32>, BackendError>;
}

impl<B: ModelBackend + ?Sized> ModelBackend for alloc::boxed::Box<B> {
    fn identity(&self) -> BackendIdentity {
        (**self).identity()
    }
    fn input_shape(&self) -> &[usize] {
        (**self).input_shape()
    }
    fn output_len(&self) -> Option<usize> {
        (**self).output_len()
    }
    fn infer(&mut self, input: &ModelInput<'_>) -> Result<Vec<f32>, BackendError> {
        (**self).infer(input)
    }
}

/// Image → candidate boxes.
pub trait ObjectDetector {
    /// Name and version.
    fn identity(&self) -> BackendIdentity;

    /// Runs detection on a decoded image.
    fn detect(&mut self, image: &RgbImage) -> Result<Vec<Detection>, BackendError>;
}

impl<D: ObjectDetector + ?Sized> ObjectDetector for alloc::boxed::Box<D> {
    fn identity(&self) -> BackendIdentity {
        (**self).identity()
    }
    fn detect(&mut self, image: &RgbImage) -> Result<Vec<Detection>, BackendError> {
        (**self).detect(image)
    }
}

/// Checks a classifier output: non-negative, finite, summing to 1 ± 0.001.
pub fn validate_probabilities(p: &[f32]) -> Result<(), BackendError> {
    if p.is_empty() {
        return Err(BackendError::BadOutput("empty probability vector".into()));
    }
    if let Some(i) = p.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(BackendError::BadOutput(format!("probability {i} is {}", p[i])));
    }
    let sum: f64 = p.iter().map(|&v| f64::from(v)).sum();
    if !(0.999..=1.001).contains(&sum) {
        return Err(BackendError::BadOutput(format!("probabilities sum to {sum}")));
    }
    Ok(())
}

pub(crate) fn check_shape(declared: &[usize], actual: &[usize]) -> Result<(), BackendError> {
    if declared.is_empty() || declared == actual {
        Ok(())
    } else {
        Err(BackendError::Shape { expected: declared.to_vec(), actual: actual.to_vec() })
    }
}
