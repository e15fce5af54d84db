use alloc::vec::Vec;

use super::AudioError;

/// Mono PCM samples in `[-1, 1]` with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    /// Wraps mono samples, rejecting non-finite values and a zero rate.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFiniteSample(i));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Averages interleaved multichannel frames into a mono clip.
    pub fn from_interleaved(interleaved: &[f32], channels: usize, sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(downmix(interleaved, channels)?, sample_rate)
    }

    /// Mono samples.
    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    /// Consumes the clip, returning its samples.
    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    /// Sample rate in Hz.
    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Always 1: clips are mono after downmixing.
    pub fn channel_count(&self) -> usize {
        1
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the clip holds no samples.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Root-mean-square amplitude; 0 for an empty clip.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let energy: f64 = self.samples.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
        crate::math::sqrt(energy / self.samples.len() as f64)
    }
}

/// Per-sample arithmetic mean across channels of interleaved frames.
pub fn downmix(interleaved: &[f32], channels: usize) -> Result<Vec<f32>, AudioError> {
    if channels == 0 {
        return Err(AudioError::InvalidChannelCount(channels));
    }
    if interleaved.len() % channels != 0 {
        return Err(AudioError::RaggedFrames { len: interleaved.len(), channels });
    }
    if channels == 1 {
        return Ok(interleaved.to_vec());
    }
    let scale = 1.0 / channels as f64;
    Ok(interleaved.chunks_exact(channels).map(|frame| (frame.iter().map(|&s| f64::from(s)).sum::<f64>() * scale) as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn stereo_frames_are_averaged() {
        let mono = downmix(&[0.5, -0.5, 1.0, 0.0], 2).unwrap();
        assert_eq!(mono, vec![0.0, 0.5]);
    }

    #[test]
    fn mono_passes_through() {
        let input = [0.1, -0.2, 0.3];
        assert_eq!(downmix(&input, 1).unwrap(), input.to_vec());
    }

    #[test]
    fn ragged_and_invalid_input_rejected() {
        assert!(matches!(downmix(&[0.0; 3], 2), Err(AudioError::RaggedFrames { .. })));
        assert!(matches!(downmix(&[0.0; 3], 0), Err(AudioError::InvalidChannelCount(0))));
        assert!(matches!(AudioClip::new(vec![0.0, f32::NAN], 8000), Err(AudioError::NonFiniteSample(1))));
        assert!(AudioClip::new(vec![0.0], 0).is_err());
    }

    #[test]
    fn duration() {
        let clip = AudioClip::new(vec![0.0; 48_000], 32_000).unwrap();
        assert!((clip.duration_seconds() - 1.5).abs() < 1e-12);
        assert_eq!(clip.channel_count(), 1);
    }
}
