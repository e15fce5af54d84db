use alloc::format;
use alloc::string::{String, ToString};

use super::backend::check_shape;
use super::{validate_probabilities, BackendError, Clock, ModelBackend, ModelInput, PipelineConfig};
use crate::audio::{ActivityFrontend, AudioClip, SpeciesFrontend};
use crate::detection::{Modality, Sighting};

/// Outcome of the activity gate for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct GateDecision {
    /// Detector output; 0 when the detector failed.
    pub p_bird: f64,
    /// `p_bird ≥ gate_threshold`, and no error.
    pub passed: bool,
    /// Segment position in the stream.
    pub segment_index: u64,
    /// Wall-clock time of the decision.
    pub wall_time_ms: i64,
    /// Failure that forced the segment closed.
    pub error: Option<String>,
}

/// Runs the activity detector on a segment at the activity rate.
///
/// Any failure (bad segment, backend error, malformed output) yields a
/// closed decision with `error` set.
pub fn gate<B: ModelBackend + ?Sized>(
    segment: &AudioClip,
    segment_index: u64,
    detector: &mut B,
    frontend: &ActivityFrontend,
    cfg: &PipelineConfig,
    clock: &dyn Clock,
) -> GateDecision {
    let result = frontend.compute(segment).map_err(|e| e.to_string()).and_then(|features| {
        let shape = features.shape();
        check_shape(detector.input_shape(), &shape).map_err(|e| e.to_string())?;
        let input = ModelInput { tensor: features.values(), shape: &shape, waveform: Some(segment) };
        let out = detector.infer(&input).map_err(|e| e.to_string())?;
        match out.as_slice() {
            [p] if p.is_finite() && (0.0..=1.0).contains(p) => Ok(f64::from(*p)),
            _ => Err(format!("activity detector returned {out:?}, expected one probability")),
        }
    });
    let wall_time_ms = clock.now_ms();
    match result {
        Ok(p_bird) => GateDecision { p_bird, passed: p_bird >= cfg.gate_threshold, segment_index, wall_time_ms, error: None },
        Err(e) => GateDecision { p_bird: 0.0, passed: false, segment_index, wall_time_ms, error: Some(e) },
    }
}

/// Index and value of the largest probability, lowest index on ties.
pub(crate) fn top_class(p: &[f32]) -> Option<(usize, f32)> {
    let mut best: Option<(usize, f32)> = None;
    for (i, &v) in p.iter().enumerate() {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Strict `p > threshold` in both precisions, so that a reported
/// confidence widened to `f64` is always above the threshold.
pub(crate) fn above(p: f32, threshold: f64) -> bool {
    p > threshold as f32 && f64::from(p) > threshold
}

/// Species features → classifier → argmax; a sighting when the top
/// probability is strictly above the audio report threshold.
pub fn classify_species<B: ModelBackend + ?Sized>(
    segment: &AudioClip,
    classifier: &mut B,
    catalog: &[String],
    frontend: &SpeciesFrontend,
    cfg: &PipelineConfig,
    clock: &dyn Clock,
) -> Result<Option<Sighting>, BackendError> {
    let features = frontend.compute(segment).map_err(|e| BackendError::Failed(e.to_string()))?;
    let shape = features.shape();
    check_shape(classifier.input_shape(), &shape)?;
    let input = ModelInput { tensor: features.values(), shape: &shape, waveform: Some(segment) };
    let p = classifier.infer(&input)?;
    if p.len() != catalog.len() {
        return Err(BackendError::BadOutput(format!("{} probabilities for {} classes", p.len(), catalog.len())));
    }
    validate_probabilities(&p)?;
    let Some((k, pk)) = top_class(&p) else { return Ok(None) };
    if !above(pk, cfg.species_report_threshold) {
        return Ok(None);
    }
    Ok(Some(Sighting {
        species: catalog[k].clone(),
        confidence: f64::from(pk),
        timestamp_ms: clock.now_ms(),
        modality: Modality::Audio,
        media_ref: None,
    }))
}
