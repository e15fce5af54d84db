//! Deterministic stand-ins for neural backends.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::backend::check_shape;
use super::{BackendError, BackendIdentity, ModelBackend, ModelInput, ObjectDetector, RgbImage};
use crate::dataset::{Detection, COCO_BIRD_CLASS};
use crate::geometry::BoundingBox;

/// Returns the same output for every input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantBackend {
    output: Vec<f32>,
    shape: Vec<usize>,
}

impl ConstantBackend {
    /// Backend that always answers `output`.
    pub fn new(output: Vec<f32>) -> Self {
        Self { output, shape: Vec::new() }
    }

    /// Activity detector answering `p_bird` for every segment.
    pub fn p_bird(p: f32) -> Self {
        Self::new(vec![p])
    }

    /// Classifier with all mass on class `k` of `n`.
    pub fn one_hot(k: usize, n: usize) -> Self {
        let mut out = vec![0.0; n];
        if let Some(v) = out.get_mut(k) {
            *v = 1.0;
        }
        Self::new(out)
    }

    /// Declares an input shape that callers must match.
    pub fn with_input_shape(mut self, shape: Vec<usize>) -> Self {
        self.shape = shape;
        self
    }
}

impl ModelBackend for ConstantBackend {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new("stub-constant", "1")
    }

    fn input_shape(&self) -> &[usize] {
        &self.shape
    }

    fn output_len(&self) -> Option<usize> {
        Some(self.output.len())
    }

    fn infer(&mut self, input: &ModelInput<'_>) -> Result<Vec<f32>, BackendError> {
        check_shape(&self.shape, input.shape)?;
        Ok(self.output.clone())
    }
}

/// Activity gate driven by segment loudness.
///
/// `p_bird = 1 - 5^(-rms / level)`, so the default gate threshold of 0.8 is
/// crossed exactly when the RMS reaches `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyGate {
    level: f64,
}

impl EnergyGate {
    /// Gate calibrated to `level` RMS (must be positive).
    pub fn new(level: f64) -> Result<Self, BackendError> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(BackendError::Failed(format!("energy level must be positive, got {level}")));
        }
        Ok(Self { level })
    }

    /// `p_bird` for a given RMS.
    pub fn probability(&self, rms: f64) -> f64 {
        1.0 - crate::math::exp(-(rms / self.level) * crate::math::ln(5.0))
    }
}

impl ModelBackend for EnergyGate {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new("stub-energy", "1")
    }

    fn input_shape(&self) -> &[usize] {
        &[]
    }

    fn output_len(&self) -> Option<usize> {
        Some(1)
    }

    fn infer(&mut self, input: &ModelInput<'_>) -> Result<Vec<f32>, BackendError> {
        let clip = input.waveform.ok_or_else(|| BackendError::Failed("energy gate needs the waveform".into()))?;
        Ok(vec![self.probability(clip.rms()) as f32])
    }
}

/// Classifier that scores each class by the mean of one contiguous chunk
/// of the feature tensor and applies a softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandEnergyClassifier {
    n_classes: usize,
}

impl BandEnergyClassifier {
    /// Classifier over `n_classes` (at least 1).
    pub fn new(n_classes: usize) -> Self {
        Self { n_classes: n_classes.max(1) }
    }
}

impl ModelBackend for BandEnergyClassifier {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new("stub-band-energy", "1")
    }

    fn input_shape(&self) -> &[usize] {
        &[]
    }

    fn output_len(&self) -> Option<usize> {
        Some(self.n_classes)
    }

    fn infer(&mut self, input: &ModelInput<'_>) -> Result<Vec<f32>, BackendError> {
        let t = input.tensor;
        if t.len() < self.n_classes {
            return Err(BackendError::Failed(format!("tensor of {} values for {} classes", t.len(), self.n_classes)));
        }
        let logits: Vec<f64> = (0..self.n_classes)
            .map(|c| {
                let lo = c * t.len() / self.n_classes;
                let hi = (c + 1) * t.len() / self.n_classes;
                t[lo..hi].iter().map(|&v| f64::from(v)).sum::<f64>() / (hi - lo) as f64
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| crate::math::exp(l - max)).collect();
        let z: f64 = exps.iter().sum();
        Ok(exps.iter().map(|&e| (e / z) as f32).collect())
    }
}

/// Detector reporting one bird box covering the whole image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullFrameDetector {
    confidence: f64,
}

impl FullFrameDetector {
    /// Detector with the given confidence.
    pub fn new(confidence: f64) -> Self {
        Self { confidence }
    }
}

impl Default for FullFrameDetector {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl ObjectDetector for FullFrameDetector {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new("stub-full-frame", "1")
    }

    fn detect(&mut self, image: &RgbImage) -> Result<Vec<Detection>, BackendError> {
        let bbox = BoundingBox::new(0.0, 0.0, f64::from(image.width()), f64::from(image.height()));
        Ok(vec![Detection { bbox, confidence: self.confidence, class_id: COCO_BIRD_CLASS }])
    }
}

/// Detector returning a fixed list of boxes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixedDetector {
    detections: Vec<Detection>,
}

impl FixedDetector {
    /// Detector answering `detections` for every image.
    pub fn new(detections: Vec<Detection>) -> Self {
        Self { detections }
    }
}

impl ObjectDetector for FixedDetector {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new("stub-fixed", "1")
    }

    fn detect(&mut self, _image: &RgbImage) -> Result<Vec<Detection>, BackendError> {
        Ok(self.detections.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::AudioClip;

    #[test]
    fn energy_gate_threshold_at_level() {
        let g = EnergyGate::new(0.05).unwrap();
        assert!((g.probability(0.05) - 0.8).abs() < 1e-12);
        assert!(g.probability(0.049) < 0.8);
        assert!(g.probability(0.051) > 0.8);
        assert_eq!(g.probability(0.0), 0.0);
        assert!(g.probability(10.0) <= 1.0);
        assert!(EnergyGate::new(0.0).is_err());
    }

    #[test]
    fn energy_gate_reads_waveform() {
        let clip = AudioClip::new(vec![0.1; 100], 48_000).unwrap();
        let mut g = EnergyGate::new(0.1).unwrap();
        let input = ModelInput { tensor: &[], shape: &[], waveform: Some(&clip) };
        let p = g.infer(&input).unwrap()[0];
        assert!((p - 0.8).abs() < 1e-6);
        let bare = ModelInput { tensor: &[], shape: &[], waveform: None };
        assert!(g.infer(&bare).is_err());
    }

    #[test]
    fn band_energy_is_a_distribution() {
        let t: Vec<f32> = (0..120).map(|i| i as f32 / 120.0).collect();
        let mut c = BandEnergyClassifier::new(4);
        let p = c.infer(&ModelInput { tensor: &t, shape: &[120], waveform: None }).unwrap();
        assert_eq!(p.len(), 4);
        super::super::validate_probabilities(&p).unwrap();
        assert!(p[3] > p[0]);
    }

    #[test]
    fn one_hot_and_shape_check() {
        let mut b = ConstantBackend::one_hot(2, 3).with_input_shape(vec![2]);
        assert_eq!(b.infer(&ModelInput { tensor: &[0.0, 0.0], shape: &[2], waveform: None }).unwrap(), [0.0, 0.0, 1.0]);
        assert!(b.infer(&ModelInput { tensor: &[0.0], shape: &[1], waveform: None }).is_err());
    }
}
