use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{AudioClip, AudioError, RealFft};
use crate::math;

/// Power floor applied before taking logarithms.
pub const AMIN: f64 = 1e-10;

// Slaney mel scale: linear below 1 kHz, logarithmic above.
const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;
// ln(6.4) / 27
const LOG_STEP: f64 = 0.068_751_777_420_949_12;

/// Hz to Slaney mel.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz >= MIN_LOG_HZ {
        MIN_LOG_MEL + math::ln(hz / MIN_LOG_HZ) / LOG_STEP
    } else {
        hz / F_SP
    }
}

/// Slaney mel to Hz.
pub fn mel_to_hz(mel: f64) -> f64 {
    if mel >= MIN_LOG_MEL {
        MIN_LOG_HZ * math::exp((mel - MIN_LOG_MEL) * LOG_STEP)
    } else {
        mel * F_SP
    }
}

/// Parameters of a mel spectrogram front-end.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MelConfig {
    /// Expected input rate in Hz.
    pub sample_rate: u32,
    /// Number of triangular mel filters.
    pub n_mels: usize,
    /// FFT length (and Hann window length) in samples.
    pub n_fft: usize,
    /// Frame advance in samples.
    pub hop: usize,
    /// Lower clip bound in dB.
    pub db_floor: f64,
    /// Upper clip bound in dB.
    pub db_ceil: f64,
}

impl MelConfig {
    /// Species classifier front-end: 32 kHz, 128 mels, 512-point FFT, hop 512.
    pub const fn species() -> Self {
        Self { sample_rate: 32_000, n_mels: 128, n_fft: 512, hop: 512, db_floor: -80.0, db_ceil: 0.0 }
    }

    /// Activity detector front-end: 48 kHz, 64 mels, 2048-point FFT, hop 512.
    pub const fn activity() -> Self {
        Self { sample_rate: 48_000, n_mels: 64, n_fft: 2048, hop: 512, db_floor: -80.0, db_ceil: 0.0 }
    }

    /// Checks the invariants every front-end relies on.
    pub fn validate(&self) -> Result<(), AudioError> {
        let fail = |msg: &str| Err(AudioError::Config(msg.into()));
        if self.sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate(0));
        }
        if self.n_mels == 0 {
            return fail("n_mels must be positive");
        }
        if self.hop == 0 {
            return fail("hop must be positive");
        }
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return fail("n_fft must be a power of two");
        }
        if !(self.db_floor.is_finite() && self.db_ceil.is_finite() && self.db_floor < self.db_ceil) {
            return fail("db_floor must be below db_ceil");
        }
        Ok(())
    }

    /// Number of STFT frames produced for `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        1 + len / self.hop
    }
}

/// Triangular mel filterbank, row-major `n_mels × (n_fft/2 + 1)`.
///
/// Filters are area-normalized. At low frequencies the mel spacing can be
/// narrower than one FFT bin; each triangle is widened to at least one bin
/// spacing on either side of its center so no filter is empty.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Vec<f64>,
    // nonzero bin range of each filter
    support: Vec<core::ops::Range<usize>>,
    centers: Vec<f64>,
    n_mels: usize,
    n_bins: usize,
}

impl MelFilterbank {
    /// Builds `n_mels` filters spanning 0 Hz to `sample_rate / 2`.
    pub fn new(sample_rate: u32, n_fft: usize, n_mels: usize) -> Self {
        let n_bins = n_fft / 2 + 1;
        let nyquist = f64::from(sample_rate) / 2.0;
        let bin_hz = f64::from(sample_rate) / n_fft as f64;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64)).collect();
        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let center = edges[m + 1];
            let lo = edges[m].min(center - bin_hz);
            let hi = edges[m + 2].max(center + bin_hz);
            let norm = 2.0 / (hi - lo);
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                let rise = (f - lo) / (center - lo);
                let fall = (hi - f) / (hi - center);
                *w = rise.min(fall).max(0.0) * norm;
            }
        }
        let support = weights
            .chunks(n_bins)
            .map(|row| {
                let lo = row.iter().position(|&w| w > 0.0).unwrap_or(0);
                let hi = row.iter().rposition(|&w| w > 0.0).map_or(lo, |i| i + 1);
                lo..hi
            })
            .collect();
        Self { weights, support, centers: edges[1..=n_mels].to_vec(), n_mels, n_bins }
    }

    /// Filter `m` over the FFT bins.
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Bins where filter `m` is nonzero.
    pub fn support(&self, m: usize) -> core::ops::Range<usize> {
        self.support[m].clone()
    }

    /// Center frequency of each filter in Hz, ascending.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Number of filters.
    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    /// Number of FFT bins each filter spans.
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }
}

/// Clipped dB mel spectrogram, row-major `n_mels × n_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFeatures {
    values: Vec<f32>,
    n_frames: usize,
    config: MelConfig,
}

impl MelFeatures {
    /// Wraps a row-major matrix; `values.len()` must be `n_mels · n_frames`.
    pub fn from_values(values: Vec<f32>, n_frames: usize, config: MelConfig) -> Result<Self, AudioError> {
        if n_frames == 0 || values.len() != config.n_mels * n_frames {
            return Err(AudioError::Config(alloc::format!("{} values do not form a {}x{} matrix", values.len(), config.n_mels, n_frames)));
        }
        Ok(Self { values, n_frames, config })
    }

    /// Row-major values in dB.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Consumes the features, returning the raw matrix.
    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    /// Value at mel band `m`, frame `t`.
    pub fn get(&self, m: usize, t: usize) -> f32 {
        self.values[m * self.n_frames + t]
    }

    /// Mel band `m` across all frames.
    pub fn band(&self, m: usize) -> &[f32] {
        &self.values[m * self.n_frames..(m + 1) * self.n_frames]
    }

    /// Number of mel bands.
    pub fn n_mels(&self) -> usize {
        self.config.n_mels
    }

    /// Number of frames.
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// Configuration that produced the features.
    pub fn config(&self) -> &MelConfig {
        &self.config
    }
}

/// Reusable STFT + mel projection engine for one [`MelConfig`].
#[derive(Debug, Clone)]
pub struct MelSpectrogram {
    config: MelConfig,
    fft: RealFft,
    window: Vec<f64>,
    filterbank: MelFilterbank,
}

impl MelSpectrogram {
    /// Precomputes the window, FFT plan and filterbank.
    pub fn new(config: MelConfig) -> Result<Self, AudioError> {
        config.validate()?;
        let fft = RealFft::new(config.n_fft)?;
        // periodic Hann
        let n = config.n_fft as f64;
        let window = (0..config.n_fft).map(|i| 0.5 - 0.5 * math::cos(2.0 * PI * i as f64 / n)).collect();
        let filterbank = MelFilterbank::new(config.sample_rate, config.n_fft, config.n_mels);
        Ok(Self { config, fft, window, filterbank })
    }

    /// Configuration of this engine.
    pub fn config(&self) -> &MelConfig {
        &self.config
    }

    /// Filterbank used for the projection.
    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Mel power spectrogram (before dB), row-major `n_mels × n_frames`.
    pub fn power(&self, samples: &[f32]) -> Vec<f64> {
        let cfg = &self.config;
        let n_frames = cfg.frames_for(samples.len());
        let pad = (cfg.n_fft / 2) as isize;
        let n_bins = self.fft.bins();
        let mut frame = vec![0.0; cfg.n_fft];
        let mut scratch = Vec::with_capacity(cfg.n_fft);
        let mut spectrum = vec![0.0; n_bins];
        let mut out = vec![0.0; cfg.n_mels * n_frames];
        for t in 0..n_frames {
            let start = (t * cfg.hop) as isize - pad;
            for (i, slot) in frame.iter_mut().enumerate() {
                let idx = reflect_index(start + i as isize, samples.len());
                *slot = f64::from(samples[idx]) * self.window[i];
            }
            self.fft.power_spectrum(&frame, &mut scratch, &mut spectrum);
            for m in 0..cfg.n_mels {
                let bins = self.filterbank.support(m);
                let row = &self.filterbank.row(m)[bins.clone()];
                let energy: f64 = row.iter().zip(&spectrum[bins]).map(|(w, p)| w * p).sum();
                out[m * n_frames + t] = energy;
            }
        }
        out
    }

    /// Peak-referenced, clipped dB mel spectrogram of `clip`.
    pub fn compute(&self, clip: &AudioClip) -> Result<MelFeatures, AudioError> {
        if clip.sample_rate() != self.config.sample_rate {
            return Err(AudioError::RateMismatch { expected: self.config.sample_rate, actual: clip.sample_rate() });
        }
        if clip.is_empty() {
            return Err(AudioError::EmptyInput);
        }
        let power = self.power(clip.samples());
        let n_frames = self.config.frames_for(clip.len());
        let values = power_to_db(&power, self.config.db_floor, self.config.db_ceil);
        MelFeatures::from_values(values, n_frames, self.config)
    }
}

/// Computes the clipped dB mel spectrogram of `clip` under `cfg`.
pub fn mel_spectrogram(clip: &AudioClip, cfg: &MelConfig) -> Result<MelFeatures, AudioError> {
    MelSpectrogram::new(*cfg)?.compute(clip)
}

/// `10·log10(max(P, amin) / peak)` clipped to `[floor, ceil]`.
///
/// A spectrogram whose peak does not exceed [`AMIN`] carries no signal and
/// maps entirely to `floor`.
fn power_to_db(power: &[f64], floor: f64, ceil: f64) -> Vec<f32> {
    let peak = power.iter().copied().fold(0.0_f64, f64::max);
    if peak <= AMIN {
        return vec![floor as f32; power.len()];
    }
    let ref_db = 10.0 * math::log10(peak);
    power.iter().map(|&p| (10.0 * math::log10(p.max(AMIN)) - ref_db).clamp(floor, ceil) as f32).collect()
}

/// Mirror-reflects an out-of-range index into `0..len` without repeating the edge.
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m >= len as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}
