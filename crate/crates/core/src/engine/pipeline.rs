use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{
    classify_species, gate, Clock, DetectionSink, GateDecision, ModelBackend, PipelineConfig, PipelineError, SampleSource, Segment,
    Segmenter,
};
use crate::audio::{ActivityFrontend, AudioClip, MelConfig, Resampler, SpeciesFrontend};
use crate::detection::Sighting;

/// Counters of one audio pipeline run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DutyCycleStats {
    /// Segments seen.
    pub segments_total: u64,
    /// Segments whose gate decision passed.
    pub segments_gated_in: u64,
    /// Species classifier runs; always equals `segments_gated_in`.
    pub classifier_invocations: u64,
    /// Activity detector runs.
    pub gate_inferences: u64,
    /// Segments forced closed by an error.
    pub gate_errors: u64,
    /// Classifier runs that failed.
    pub classifier_errors: u64,
    /// Sightings delivered to the sink.
    pub records_emitted: u64,
    /// Zero-padded final segments.
    pub partial_segments: u64,
}

impl DutyCycleStats {
    /// `segments_gated_in / segments_total`, 0 for an empty run.
    pub fn duty_cycle(&self) -> f64 {
        if self.segments_total == 0 {
            0.0
        } else {
            self.segments_gated_in as f64 / self.segments_total as f64
        }
    }
}

/// What happened to one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentOutcome {
    /// Gate decision.
    pub decision: GateDecision,
    /// Emitted sighting, if any.
    pub sighting: Option<Sighting>,
    /// Classifier failure, if any.
    pub classifier_error: Option<String>,
}

/// Gate + species classifier over a stream of segments.
pub struct AudioPipeline<G, C> {
    gate: G,
    classifier: C,
    catalog: Vec<String>,
    cfg: PipelineConfig,
    activity: ActivityFrontend,
    species: SpeciesFrontend,
    to_gate: Option<Resampler>,
    stats: DutyCycleStats,
}

impl<G: ModelBackend, C: ModelBackend> AudioPipeline<G, C> {
    /// Checks configuration and the catalog against the classifier output.
    pub fn new(gate: G, classifier: C, catalog: Vec<String>, cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        if catalog.is_empty() {
            return Err(PipelineError::Config("empty species catalog".into()));
        }
        if let Some(n) = classifier.output_len() {
            if n != catalog.len() {
                return Err(PipelineError::Config(format!(
                    "classifier {} outputs {n} classes but the catalog has {}",
                    classifier.identity().name,
                    catalog.len()
                )));
            }
        }
        if let Some(n) = gate.output_len() {
            if n != 1 {
                return Err(PipelineError::Config(format!("activity detector outputs {n} values, expected 1")));
            }
        }
        Ok(Self {
            gate,
            classifier,
            catalog,
            cfg,
            activity: ActivityFrontend::default(),
            species: SpeciesFrontend::default(),
            to_gate: None,
            stats: DutyCycleStats::default(),
        })
    }

    /// Counters so far.
    pub fn stats(&self) -> DutyCycleStats {
        self.stats
    }

    /// Configuration in use.
    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Species catalog.
    pub fn catalog(&self) -> &[String] {
        &self.catalog
    }

    fn gate_clip(&mut self, clip: &AudioClip) -> Result<AudioClip, String> {
        let rate = MelConfig::activity().sample_rate;
        if clip.sample_rate() == rate {
            return Ok(clip.clone());
        }
        let stale = self.to_gate.as_ref().map_or(true, |r| r.from_rate() != clip.sample_rate());
        if stale {
            self.to_gate = Some(Resampler::new(clip.sample_rate(), rate).map_err(|e| e.to_string())?);
        }
        let r = self.to_gate.as_ref().expect("resampler just set");
        AudioClip::new(r.process(clip.samples()), rate).map_err(|e| e.to_string())
    }

    /// Gates one segment and classifies it if it passes.
    pub fn process(&mut self, segment: &Segment, clock: &dyn Clock) -> SegmentOutcome {
        self.stats.segments_total += 1;
        if segment.partial {
            self.stats.partial_segments += 1;
        }
        let decision = match self.gate_clip(&segment.clip) {
            Ok(clip) => {
                self.stats.gate_inferences += 1;
                gate(&clip, segment.index, &mut self.gate, &self.activity, &self.cfg, clock)
            }
            Err(e) => {
                GateDecision { p_bird: 0.0, passed: false, segment_index: segment.index, wall_time_ms: clock.now_ms(), error: Some(e) }
            }
        };
        if decision.error.is_some() {
            self.stats.gate_errors += 1;
        }
        if !decision.passed {
            return SegmentOutcome { decision, sighting: None, classifier_error: None };
        }
        self.stats.segments_gated_in += 1;
        self.stats.classifier_invocations += 1;
        match classify_species(&segment.clip, &mut self.classifier, &self.catalog, &self.species, &self.cfg, clock) {
            Ok(sighting) => {
                if sighting.is_some() {
                    self.stats.records_emitted += 1;
                }
                SegmentOutcome { decision, sighting, classifier_error: None }
            }
            Err(e) => {
                self.stats.classifier_errors += 1;
                SegmentOutcome { decision, sighting: None, classifier_error: Some(e.to_string()) }
            }
        }
    }

    /// Consumes `source` until it ends or `stop` returns true, delivering
    /// sightings in segment order.
    pub fn run<S, K>(&mut self, source: S, sink: &mut K, clock: &dyn Clock, mut stop: impl FnMut() -> bool) -> Result<(), PipelineError>
    where
        S: SampleSource,
        K: DetectionSink + ?Sized,
    {
        for segment in Segmenter::new(source, self.cfg.segment_seconds, self.cfg.segment_hop_seconds) {
            if stop() {
                break;
            }
            let outcome = self.process(&segment?, clock);
            if let Some(s) = outcome.sighting {
                sink.deliver(s);
            }
        }
        Ok(())
    }
}

/// Runs the gated audio pipeline over a whole source.
pub fn run_audio_pipeline<S, G, C, K>(
    source: S,
    gate: G,
    classifier: C,
    catalog: Vec<String>,
    cfg: &PipelineConfig,
    sink: &mut K,
    clock: &dyn Clock,
) -> Result<DutyCycleStats, PipelineError>
where
    S: SampleSource,
    G: ModelBackend,
    C: ModelBackend,
    K: DetectionSink + ?Sized,
{
    let mut p = AudioPipeline::new(gate, classifier, catalog, *cfg)?;
    p.run(source, sink, clock, || false)?;
    Ok(p.stats())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::stubs::{BandEnergyClassifier, ConstantBackend, EnergyGate};
    use crate::engine::{BackendError, BackendIdentity, FixedClock, ModelInput, SliceSource};
    use alloc::vec;

    fn catalog(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    /// 3 s segments at 16 kHz, loud when `loud(i)`.
    fn recording(n: usize, loud: impl Fn(usize) -> bool) -> Vec<f32> {
        let seg = 48_000;
        (0..n * seg)
            .map(|i| {
                let a = if loud(i / seg) { 0.5 } else { 0.001 };
                a * libm::sinf(i as f32 * 0.3)
            })
            .collect()
    }

    #[test]
    fn gating_counts_under_energy_stub() {
        let audio = recording(20, |i| i % 3 == 0);
        let mut sink: Vec<Sighting> = Vec::new();
        let stats = run_audio_pipeline(
            SliceSource::new(&audio, 16_000),
            EnergyGate::new(0.05).unwrap(),
            BandEnergyClassifier::new(4),
            catalog(4),
            &PipelineConfig::default(),
            &mut sink,
            &FixedClock(0),
        )
        .unwrap();
        assert_eq!(stats.segments_total, 20);
        assert_eq!(stats.segments_gated_in, 7);
        assert_eq!(stats.classifier_invocations, 7);
        assert_eq!(stats.gate_errors, 0);
        assert!((stats.duty_cycle() - 0.35).abs() < 1e-12);
        assert!(sink.iter().all(|s| s.confidence > 0.15));
    }

    #[test]
    fn closed_gate_never_classifies() {
        let audio = recording(5, |_| true);
        let mut sink: Vec<Sighting> = Vec::new();
        let stats = run_audio_pipeline(
            SliceSource::new(&audio, 16_000),
            ConstantBackend::p_bird(0.0),
            ConstantBackend::one_hot(0, 2),
            catalog(2),
            &PipelineConfig::default(),
            &mut sink,
            &FixedClock(0),
        )
        .unwrap();
        assert_eq!(stats.classifier_invocations, 0);
        assert!(sink.is_empty());
    }

    #[test]
    fn catalog_mismatch_is_a_startup_error() {
        let r = AudioPipeline::new(ConstantBackend::p_bird(1.0), ConstantBackend::one_hot(0, 3), catalog(2), PipelineConfig::default());
        assert!(matches!(r, Err(PipelineError::Config(_))));
    }

    struct Broken;

    impl ModelBackend for Broken {
        fn identity(&self) -> BackendIdentity {
            BackendIdentity::new("broken", "0")
        }
        fn input_shape(&self) -> &[usize] {
            &[]
        }
        fn output_len(&self) -> Option<usize> {
            None
        }
        fn infer(&mut self, _: &ModelInput<'_>) -> Result<Vec<f32>, BackendError> {
            Err(BackendError::Failed("boom".into()))
        }
    }

    #[test]
    fn backend_errors_are_counted_and_run_continues() {
        let audio = recording(3, |_| true);
        let mut sink: Vec<Sighting> = Vec::new();
        let stats = run_audio_pipeline(
            SliceSource::new(&audio, 16_000),
            Broken,
            ConstantBackend::one_hot(0, 1),
            catalog(1),
            &PipelineConfig::default(),
            &mut sink,
            &FixedClock(0),
        )
        .unwrap();
        assert_eq!((stats.segments_total, stats.gate_errors, stats.segments_gated_in), (3, 3, 0));

        let stats = run_audio_pipeline(
            SliceSource::new(&audio, 16_000),
            ConstantBackend::p_bird(1.0),
            Broken,
            catalog(1),
            &PipelineConfig::default(),
            &mut sink,
            &FixedClock(0),
        )
        .unwrap();
        assert_eq!((stats.classifier_invocations, stats.classifier_errors), (3, 3));
        assert!(sink.is_empty());
    }

    #[test]
    fn stop_flag_ends_run() {
        let audio = recording(4, |_| true);
        let mut p = AudioPipeline::new(ConstantBackend::p_bird(1.0), ConstantBackend::one_hot(0, 1), catalog(1), PipelineConfig::default())
            .unwrap();
        let mut calls = 0;
        let mut sink: Vec<Sighting> = Vec::new();
        p.run(SliceSource::new(&audio, 16_000), &mut sink, &FixedClock(0), || {
            calls += 1;
            calls > 2
        })
        .unwrap();
        assert_eq!(p.stats().segments_total, 2);
        assert_eq!(sink.len(), 2);
        assert_eq!(sink, vec![sink[0].clone(); 2]);
    }
}
