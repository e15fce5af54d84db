//! Audio front-ends.
//!
//! Two feature pipelines share the STFT and mel machinery here:
//!
//! * the species front-end: resample to 32 kHz, 128-band mel power
//!   spectrogram (512-point FFT, hop 512), peak-referenced dB clipped to
//!   `[-80, 0]`, 8-bit quantization, wrap padding to 1000 frames and
//!   normalization with the AudioSet statistics;
//! * the activity front-end: 3 s at 48 kHz, 64 mel bands, 2048-point FFT,
//!   hop 512, time axis mean-pooled to 63 frames.

mod clip;
mod features;
mod fft;
mod mel;
mod quantize;
mod resample;

pub use clip::{downmix, AudioClip};
pub use features::{
    activity_features, normalize_passt, pool_frames, spec_augment, species_features, standardize_length, wrap_frames, ActivityFeatures,
    ActivityFrontend, MaskRegions, NormalizedFeatures, SpecAugmentConfig, SpeciesFrontend, ACTIVITY_FRAMES, ACTIVITY_SECONDS, PASST_MEAN,
    PASST_STD, SPECIES_FRAMES,
};
pub use fft::RealFft;
pub use mel::{hz_to_mel, mel_spectrogram, mel_to_hz, MelConfig, MelFeatures, MelFilterbank, MelSpectrogram, AMIN};
pub use quantize::{dequantize, quantize_u8, QuantizedSpectrogram};
pub use resample::{resample, Resampler, KAISER_BETA, TAPS_PER_PHASE};

use alloc::string::String;

/// Errors raised by the audio front-ends.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AudioError {
    /// The clip or an intermediate buffer has no samples.
    #[error("empty input")]
    EmptyInput,
    /// Sample rates must be positive.
    #[error("invalid sample rate {0} Hz")]
    InvalidSampleRate(u32),
    /// Channel count must be at least one.
    #[error("invalid channel count {0}")]
    InvalidChannelCount(usize),
    /// Interleaved data whose length is not a multiple of the channel count.
    #[error("{len} interleaved samples do not divide into {channels} channels")]
    RaggedFrames {
        /// Number of interleaved samples.
        len: usize,
        /// Declared channel count.
        channels: usize,
    },
    /// NaN or infinite sample.
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    /// Clip rate does not match the feature configuration.
    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    RateMismatch {
        /// Rate required by the configuration.
        expected: u32,
        /// Rate of the clip.
        actual: u32,
    },
    /// Clip length outside the accepted window.
    #[error("duration mismatch: expected {expected} samples (±{tolerance}), got {actual}")]
    DurationMismatch {
        /// Expected number of samples.
        expected: usize,
        /// Accepted deviation in samples.
        tolerance: usize,
        /// Actual number of samples.
        actual: usize,
    },
    /// Invalid configuration value.
    #[error("configuration error: {0}")]
    Config(String),
}
