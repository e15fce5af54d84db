use alloc::vec::Vec;

use super::{AudioError, MelConfig, MelFeatures};
use crate::math;

/// 8-bit linear quantization of a clipped dB mel spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSpectrogram {
    values: Vec<u8>,
    n_frames: usize,
    config: MelConfig,
}

impl QuantizedSpectrogram {
    /// Wraps row-major codes; `values.len()` must be `n_mels · n_frames`.
    pub fn from_codes(values: Vec<u8>, n_frames: usize, config: MelConfig) -> Result<Self, AudioError> {
        if n_frames == 0 || values.len() != config.n_mels * n_frames {
            return Err(AudioError::Config(alloc::format!("{} codes do not form a {}x{} matrix", values.len(), config.n_mels, n_frames)));
        }
        Ok(Self { values, n_frames, config })
    }

    /// Row-major codes, mel-band major.
    pub fn codes(&self) -> &[u8] {
        &self.values
    }

    /// Number of mel bands.
    pub fn n_mels(&self) -> usize {
        self.config.n_mels
    }

    /// Number of frames.
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// Mel configuration the codes were produced under.
    pub fn config(&self) -> &MelConfig {
        &self.config
    }

    /// Wrap-pads or truncates the frame axis to `target` frames.
    pub fn standardize_length(&self, target: usize) -> Result<Self, AudioError> {
        if target == 0 {
            return Err(AudioError::Config("target_frames must be at least 1".into()));
        }
        let values = super::wrap_frames(&self.values, self.n_mels(), self.n_frames, target);
        Ok(Self { values, n_frames: target, config: self.config })
    }
}

/// Encodes one dB value: `clamp(round((x - floor) / (ceil - floor) · 255), 0, 255)`.
#[inline]
pub(crate) fn quantize_value(x: f64, floor: f64, ceil: f64) -> u8 {
    math::round_half_away((x - floor) / (ceil - floor) * 255.0).clamp(0.0, 255.0) as u8
}

/// Decodes one code: `q / 255 · (ceil - floor) + floor`.
#[inline]
pub(crate) fn dequantize_value(q: u8, floor: f64, ceil: f64) -> f64 {
    f64::from(q) / 255.0 * (ceil - floor) + floor
}

/// Linear 8-bit quantization with round-half-away-from-zero.
pub fn quantize_u8(feat: &MelFeatures) -> QuantizedSpectrogram {
    let cfg = feat.config();
    let values = feat.values().iter().map(|&x| quantize_value(f64::from(x), cfg.db_floor, cfg.db_ceil)).collect();
    QuantizedSpectrogram { values, n_frames: feat.n_frames(), config: *cfg }
}

/// Maps codes back onto the dB scale.
pub fn dequantize(q: &QuantizedSpectrogram) -> MelFeatures {
    let cfg = q.config();
    let values = q.codes().iter().map(|&c| dequantize_value(c, cfg.db_floor, cfg.db_ceil) as f32).collect();
    MelFeatures::from_values(values, q.n_frames(), *cfg).expect("shape carried over from codes")
}
