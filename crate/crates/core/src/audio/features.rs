use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dequantize, quantize_u8, AudioClip, AudioError, MelConfig, MelFeatures, MelSpectrogram, QuantizedSpectrogram, Resampler};

/// AudioSet mean used by the PaSST input normalization.
pub const PASST_MEAN: f64 = -4.267_739_3;
/// AudioSet standard deviation used by the PaSST input normalization.
pub const PASST_STD: f64 = 4.568_997_4;
/// Frame count every species spectrogram is standardized to.
pub const SPECIES_FRAMES: usize = 1000;
/// Frame count of the activity detector input.
pub const ACTIVITY_FRAMES: usize = 63;
/// Length of an activity detector chunk.
pub const ACTIVITY_SECONDS: f64 = 3.0;

/// Repeats (or truncates) the frames of a row-major `rows × frames` matrix
/// cyclically until each row has `target` frames.
pub fn wrap_frames<T: Copy>(values: &[T], rows: usize, frames: usize, target: usize) -> Vec<T> {
    debug_assert_eq!(values.len(), rows * frames);
    let mut out = Vec::with_capacity(rows * target);
    for row in values.chunks_exact(frames) {
        out.extend((0..target).map(|t| row[t % frames]));
    }
    out
}

/// Mean-pools the frame axis of a row-major matrix into `target` contiguous
/// groups; group `j` covers frames `⌊j·n/target⌋ .. ⌊(j+1)·n/target⌋`.
pub fn pool_frames(values: &[f32], rows: usize, frames: usize, target: usize) -> Vec<f32> {
    debug_assert_eq!(values.len(), rows * frames);
    let bounds: Vec<Range<usize>> = (0..target)
        .map(|j| {
            let start = (j * frames / target).min(frames - 1);
            let end = ((j + 1) * frames / target).max(start + 1);
            start..end
        })
        .collect();
    let mut out = Vec::with_capacity(rows * target);
    for row in values.chunks_exact(frames) {
        for r in &bounds {
            let sum: f64 = row[r.clone()].iter().map(|&v| f64::from(v)).sum();
            out.push((sum / r.len() as f64) as f32);
        }
    }
    out
}

/// Truncates to the first `target_frames` frames, or wrap-pads shorter input.
pub fn standardize_length(feat: &MelFeatures, target_frames: usize) -> Result<MelFeatures, AudioError> {
    if target_frames == 0 {
        return Err(AudioError::Config("target_frames must be at least 1".into()));
    }
    if feat.n_frames() == target_frames {
        return Ok(feat.clone());
    }
    let values = wrap_frames(feat.values(), feat.n_mels(), feat.n_frames(), target_frames);
    MelFeatures::from_values(values, target_frames, *feat.config())
}

/// Model input tensor of shape `1 × n_mels × n_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFeatures {
    values: Vec<f32>,
    n_mels: usize,
    n_frames: usize,
    mu: f64,
    sigma: f64,
    db_floor: f64,
}

impl NormalizedFeatures {
    /// Flat tensor, mel-band major.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Tensor shape `[1, n_mels, n_frames]`.
    pub fn shape(&self) -> [usize; 3] {
        [1, self.n_mels, self.n_frames]
    }

    /// Value at band `m`, frame `t`.
    pub fn get(&self, m: usize, t: usize) -> f32 {
        self.values[m * self.n_frames + t]
    }

    /// Mean used for normalization.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Standard deviation used for normalization.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Normalized image of the dB floor, used as the SpecAugment mask value.
    pub fn mask_value(&self) -> f32 {
        ((self.db_floor - self.mu) / (2.0 * self.sigma)) as f32
    }
}

/// Elementwise `(x - mu) / (2·sigma)`.
pub fn normalize_passt(feat: &MelFeatures, mu: f64, sigma: f64) -> Result<NormalizedFeatures, AudioError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(AudioError::Config(alloc::format!("sigma must be positive, got {sigma}")));
    }
    if !mu.is_finite() {
        return Err(AudioError::Config("mu must be finite".into()));
    }
    let scale = 1.0 / (2.0 * sigma);
    let values = feat.values().iter().map(|&x| ((f64::from(x) - mu) * scale) as f32).collect();
    Ok(NormalizedFeatures { values, n_mels: feat.n_mels(), n_frames: feat.n_frames(), mu, sigma, db_floor: feat.config().db_floor })
}

/// Training-time masking parameters: one frequency and one time mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecAugmentConfig {
    /// Largest frequency mask width in mel bands.
    pub max_freq_bands: usize,
    /// Largest time mask width in frames.
    pub max_time_frames: usize,
    /// Seed of the mask draw.
    pub rng_seed: u64,
}

impl SpecAugmentConfig {
    /// 15 bands / 35 frames with the given seed.
    pub fn with_seed(rng_seed: u64) -> Self {
        Self { max_freq_bands: 15, max_time_frames: 35, rng_seed }
    }
}

/// Rectangles blanked by [`spec_augment`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskRegions {
    /// Masked mel bands (all frames).
    pub freq: Range<usize>,
    /// Masked frames (all bands).
    pub time: Range<usize>,
}

/// Applies one contiguous frequency mask and one contiguous time mask.
///
/// Widths are uniform in `0..=max` (capped at the axis length) and offsets
/// uniform over every valid position. Masked cells take
/// [`NormalizedFeatures::mask_value`].
pub fn spec_augment(feat: &NormalizedFeatures, cfg: &SpecAugmentConfig) -> (NormalizedFeatures, MaskRegions) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut draw = |max: usize, len: usize| {
        let width = rng.gen_range(0..=max.min(len));
        let start = rng.gen_range(0..=len - width);
        start..start + width
    };
    let freq = draw(cfg.max_freq_bands, feat.n_mels);
    let time = draw(cfg.max_time_frames, feat.n_frames);
    let mut out = feat.clone();
    let fill = feat.mask_value();
    for m in 0..feat.n_mels {
        let row = &mut out.values[m * feat.n_frames..(m + 1) * feat.n_frames];
        if freq.contains(&m) {
            row.fill(fill);
        } else {
            row[time.clone()].fill(fill);
        }
    }
    (out, MaskRegions { freq, time })
}

/// Species classifier front-end with its mel engine precomputed.
#[derive(Debug, Clone)]
pub struct SpeciesFrontend {
    mel: MelSpectrogram,
    target_frames: usize,
    mu: f64,
    sigma: f64,
}

impl Default for SpeciesFrontend {
    fn default() -> Self {
        Self::new(MelConfig::species()).expect("species preset is valid")
    }
}

impl SpeciesFrontend {
    /// Front-end for `config` with the default frame count and statistics.
    pub fn new(config: MelConfig) -> Result<Self, AudioError> {
        Ok(Self { mel: MelSpectrogram::new(config)?, target_frames: SPECIES_FRAMES, mu: PASST_MEAN, sigma: PASST_STD })
    }

    /// Mel configuration.
    pub fn config(&self) -> &MelConfig {
        self.mel.config()
    }

    /// Resample → mel → dB → 8-bit codes (not yet length-standardized).
    pub fn quantized(&self, clip: &AudioClip) -> Result<QuantizedSpectrogram, AudioError> {
        let rate = self.mel.config().sample_rate;
        let feat = if clip.sample_rate() == rate {
            self.mel.compute(clip)?
        } else {
            let resampled = Resampler::new(clip.sample_rate(), rate)?.process(clip.samples());
            self.mel.compute(&AudioClip::new(resampled, rate)?)?
        };
        Ok(quantize_u8(&feat))
    }

    /// Dequantize → wrap-pad to the target length → normalize.
    pub fn from_quantized(&self, q: &QuantizedSpectrogram) -> Result<NormalizedFeatures, AudioError> {
        let db = standardize_length(&dequantize(q), self.target_frames)?;
        normalize_passt(&db, self.mu, self.sigma)
    }

    /// Full chain producing the `1 × 128 × 1000` classifier input.
    pub fn compute(&self, clip: &AudioClip) -> Result<NormalizedFeatures, AudioError> {
        self.from_quantized(&self.quantized(clip)?)
    }
}

/// Species front-end with the default preset.
pub fn species_features(clip: &AudioClip) -> Result<NormalizedFeatures, AudioError> {
    SpeciesFrontend::default().compute(clip)
}

/// Activity detector input of shape `64 × 63 × 1` (dB values).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityFeatures {
    values: Vec<f32>,
}

impl ActivityFeatures {
    /// Tensor shape `[64, 63, 1]`.
    pub fn shape(&self) -> [usize; 3] {
        [self.values.len() / ACTIVITY_FRAMES, ACTIVITY_FRAMES, 1]
    }

    /// Flat tensor, mel-band major.
    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Activity detector front-end with its mel engine precomputed.
#[derive(Debug, Clone)]
pub struct ActivityFrontend {
    mel: MelSpectrogram,
}

impl Default for ActivityFrontend {
    fn default() -> Self {
        Self { mel: MelSpectrogram::new(MelConfig::activity()).expect("activity preset is valid") }
    }
}

impl ActivityFrontend {
    /// Number of samples in a nominal chunk.
    pub fn expected_samples(&self) -> usize {
        (ACTIVITY_SECONDS * f64::from(self.mel.config().sample_rate)) as usize
    }

    /// Log-mel spectrogram of a 3 s chunk pooled to 63 frames.
    pub fn compute(&self, clip: &AudioClip) -> Result<ActivityFeatures, AudioError> {
        let cfg = self.mel.config();
        if clip.sample_rate() != cfg.sample_rate {
            return Err(AudioError::RateMismatch { expected: cfg.sample_rate, actual: clip.sample_rate() });
        }
        let expected = self.expected_samples();
        if clip.len().abs_diff(expected) > cfg.hop {
            return Err(AudioError::DurationMismatch { expected, tolerance: cfg.hop, actual: clip.len() });
        }
        let feat = self.mel.compute(clip)?;
        let values = pool_frames(feat.values(), feat.n_mels(), feat.n_frames(), ACTIVITY_FRAMES);
        Ok(ActivityFeatures { values })
    }
}

/// Activity front-end with the default preset.
pub fn activity_features(clip: &AudioClip) -> Result<ActivityFeatures, AudioError> {
    ActivityFrontend::default().compute(clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn feat_from(rows: usize, values: Vec<f32>) -> MelFeatures {
        let mut cfg = MelConfig::species();
        cfg.n_mels = rows;
        let frames = values.len() / rows;
        MelFeatures::from_values(values, frames, cfg).unwrap()
    }

    #[test]
    fn wrap_padding_cycles() {
        let f = feat_from(1, vec![1.0, 2.0, 3.0]);
        let out = standardize_length(&f, 7).unwrap();
        assert_eq!(out.values(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0]);
        assert_eq!(standardize_length(&f, 3).unwrap(), f);
        assert_eq!(standardize_length(&f, 2).unwrap().values(), &[1.0, 2.0]);
        assert!(standardize_length(&f, 0).is_err());
    }

    #[test]
    fn wrap_padding_626_to_1000() {
        let row: Vec<f32> = (0..626).map(|i| i as f32).collect();
        let out = standardize_length(&feat_from(1, row), 1000).unwrap();
        assert_eq!(out.values()[999], 373.0);
    }

    #[test]
    fn normalization_constants() {
        let f = feat_from(1, vec![-4.267_739_3, 4.870_255_5]);
        let n = normalize_passt(&f, PASST_MEAN, PASST_STD).unwrap();
        assert!(n.values()[0].abs() < 1e-6);
        assert!((n.values()[1] - 1.0).abs() < 1e-6);
        assert!(normalize_passt(&f, 0.0, 0.0).is_err());
        assert!(normalize_passt(&f, 0.0, -1.0).is_err());
    }

    #[test]
    fn zero_width_masks_are_identity() {
        let f = normalize_passt(&feat_from(4, vec![-10.0; 40]), PASST_MEAN, PASST_STD).unwrap();
        let cfg = SpecAugmentConfig { max_freq_bands: 0, max_time_frames: 0, rng_seed: 3 };
        let (out, masks) = spec_augment(&f, &cfg);
        assert_eq!(out, f);
        assert!(masks.freq.is_empty() && masks.time.is_empty());
    }

    #[test]
    fn spec_augment_deterministic_and_bounded() {
        let f = normalize_passt(&feat_from(128, vec![-20.0; 128 * 50]), PASST_MEAN, PASST_STD).unwrap();
        let cfg = SpecAugmentConfig::with_seed(99);
        assert_eq!(spec_augment(&f, &cfg), spec_augment(&f, &cfg));
        for seed in 0..2000 {
            let (_, m) = spec_augment(&f, &SpecAugmentConfig::with_seed(seed));
            assert!(m.freq.len() <= 15 && m.freq.end <= 128);
            assert!(m.time.len() <= 35 && m.time.end <= 50);
        }
    }

    #[test]
    fn mask_value_is_normalized_floor() {
        let f = normalize_passt(&feat_from(1, vec![0.0]), PASST_MEAN, PASST_STD).unwrap();
        let expected = (-80.0 - PASST_MEAN) / (2.0 * PASST_STD);
        assert!((f64::from(f.mask_value()) - expected).abs() < 1e-6);
    }

    #[test]
    fn pooling_constant_rows() {
        let out = pool_frames(&vec![-7.5; 2 * 282], 2, 282, 63);
        assert_eq!(out.len(), 126);
        assert!(out.iter().all(|&v| v == -7.5));
    }

    #[test]
    fn pooling_groups_cover_all_frames() {
        let row: Vec<f32> = (0..282).map(|i| i as f32).collect();
        let out = pool_frames(&row, 1, 282, 63);
        // group 0 spans frames 0..4 (282/63 = 4.47)
        assert_eq!(out[0], 1.5);
        let total: f64 = (0..63)
            .map(|j| {
                let s = j * 282 / 63;
                let e = (j + 1) * 282 / 63;
                f64::from(out[j]) * (e - s) as f64
            })
            .sum();
        assert!((total - (0..282).sum::<usize>() as f64).abs() < 1e-6);
    }

    #[test]
    fn activity_shape_and_silence() {
        let clip = AudioClip::new(vec![0.0; 144_000], 48_000).unwrap();
        let a = activity_features(&clip).unwrap();
        assert_eq!(a.shape(), [64, 63, 1]);
        assert!(a.values().iter().all(|&v| v == -80.0));
    }

    #[test]
    fn activity_preconditions() {
        let short = AudioClip::new(vec![0.0; 144_000 - 513], 48_000).unwrap();
        assert!(matches!(activity_features(&short), Err(AudioError::DurationMismatch { expected: 144_000, tolerance: 512, .. })));
        let ok = AudioClip::new(vec![0.0; 144_000 + 512], 48_000).unwrap();
        assert!(activity_features(&ok).is_ok());
        let wrong_rate = AudioClip::new(vec![0.0; 96_000], 32_000).unwrap();
        assert!(matches!(activity_features(&wrong_rate), Err(AudioError::RateMismatch { .. })));
    }

    #[test]
    fn species_shape_for_any_length() {
        for len in [512, 10_000, 48_000 * 12] {
            let s: Vec<f32> = (0..len).map(|i| libm::sinf(i as f32 * 0.05) * 0.3).collect();
            let clip = AudioClip::new(s, 48_000).unwrap();
            assert_eq!(species_features(&clip).unwrap().shape(), [1, 128, 1000]);
        }
    }
}
