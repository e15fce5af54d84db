//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.
//!
//! For a conversion `from -> to` with `L = to / g`, `M = from / g`
//! (`g = gcd(from, to)`), output sample `n` sits at input position
//! `n·M / L`. Its integer part selects the input neighbourhood and
//! `(n·M) mod L` selects one of `L` precomputed phases of
//! [`TAPS_PER_PHASE`] coefficients.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{AudioClip, AudioError};
use crate::math;

/// Kernel length per phase.
pub const TAPS_PER_PHASE: usize = 64;
/// Kaiser window shape (~140 dB stopband).
pub const KAISER_BETA: f64 = 14.77;

const HALF: isize = (TAPS_PER_PHASE / 2) as isize;

/// Precomputed polyphase filter for one rate pair.
#[derive(Debug, Clone)]
pub struct Resampler {
    from: u32,
    to: u32,
    up: u64,
    down: u64,
    // up × TAPS_PER_PHASE, tap j covers input offset j - (HALF - 1)
    phases: Vec<f64>,
}

/// Modified Bessel function of the first kind, order zero.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn kernel(u: f64, cutoff: f64, i0_beta: f64) -> f64 {
    let r = u / HALF as f64;
    if r.abs() > 1.0 {
        return 0.0;
    }
    let window = bessel_i0(KAISER_BETA * math::sqrt(1.0 - r * r)) / i0_beta;
    let x = cutoff * u;
    let sinc = if x.abs() < 1e-12 { 1.0 } else { math::sin(PI * x) / (PI * x) };
    cutoff * sinc * window
}

impl Resampler {
    /// Builds the filter for `from -> to` Hz.
    pub fn new(from: u32, to: u32) -> Result<Self, AudioError> {
        if from == 0 {
            return Err(AudioError::InvalidSampleRate(from));
        }
        if to == 0 {
            return Err(AudioError::InvalidSampleRate(to));
        }
        let g = math::gcd(u64::from(from), u64::from(to));
        let up = u64::from(to) / g;
        let down = u64::from(from) / g;
        // relative to the input Nyquist
        let cutoff = (up as f64 / down as f64).min(1.0);
        let i0_beta = bessel_i0(KAISER_BETA);
        let mut phases = vec![0.0; up as usize * TAPS_PER_PHASE];
        for p in 0..up as usize {
            let frac = p as f64 / up as f64;
            let taps = &mut phases[p * TAPS_PER_PHASE..(p + 1) * TAPS_PER_PHASE];
            for (j, tap) in taps.iter_mut().enumerate() {
                let offset = j as isize - (HALF - 1);
                *tap = kernel(offset as f64 - frac, cutoff, i0_beta);
            }
            // unity DC gain per phase
            let sum: f64 = taps.iter().sum();
            taps.iter_mut().for_each(|t| *t /= sum);
        }
        Ok(Self { from, to, up, down, phases })
    }

    /// Input rate in Hz.
    pub fn from_rate(&self) -> u32 {
        self.from
    }

    /// Output rate in Hz.
    pub fn to_rate(&self) -> u32 {
        self.to
    }

    /// Output length for `len` input samples: `round(len · to / from)`.
    pub fn output_len(&self, len: usize) -> usize {
        let num = len as u128 * u128::from(self.to);
        let den = u128::from(self.from);
        ((2 * num + den) / (2 * den)) as usize
    }

    /// Resamples a block of mono samples.
    pub fn process(&self, input: &[f32]) -> Vec<f32> {
        if self.from == self.to {
            return input.to_vec();
        }
        let n_out = self.output_len(input.len());
        let len = input.len() as isize;
        let mut out = Vec::with_capacity(n_out);
        for n in 0..n_out as u64 {
            let pos = n * self.down;
            let base = (pos / self.up) as isize;
            let phase = (pos % self.up) as usize;
            let taps = &self.phases[phase * TAPS_PER_PHASE..(phase + 1) * TAPS_PER_PHASE];
            let first = base - (HALF - 1);
            let mut acc = 0.0;
            if first >= 0 && first + TAPS_PER_PHASE as isize <= len {
                let window = &input[first as usize..first as usize + TAPS_PER_PHASE];
                for (&x, &h) in window.iter().zip(taps) {
                    acc += f64::from(x) * h;
                }
            } else {
                for (j, &h) in taps.iter().enumerate() {
                    let i = first + j as isize;
                    if (0..len).contains(&i) {
                        acc += f64::from(input[i as usize]) * h;
                    }
                }
            }
            out.push(acc as f32);
        }
        out
    }
}

/// Band-limited conversion of `clip` to `target_rate`.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == clip.sample_rate() {
        return Ok(clip.clone());
    }
    let resampler = Resampler::new(clip.sample_rate(), target_rate)?;
    AudioClip::new(resampler.process(clip.samples()), target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::RealFft;

    fn sine(freq: f64, rate: u32, len: usize) -> Vec<f32> {
        (0..len).map(|i| libm::sin(2.0 * PI * freq * i as f64 / f64::from(rate)) as f32).collect()
    }

    #[test]
    fn length_ratio() {
        let clip = AudioClip::new(vec![0.0; 48_000], 48_000).unwrap();
        assert_eq!(resample(&clip, 32_000).unwrap().len(), 32_000);
        let r = Resampler::new(44_100, 32_000).unwrap();
        assert_eq!(r.output_len(44_101), 32_001);
        assert_eq!(r.output_len(1), 1);
    }

    #[test]
    fn identity_rate_is_untouched() {
        let clip = AudioClip::new(sine(440.0, 16_000, 1000), 16_000).unwrap();
        assert_eq!(resample(&clip, 16_000).unwrap(), clip);
    }

    #[test]
    fn tone_stays_at_its_frequency() {
        let clip = AudioClip::new(sine(1000.0, 48_000, 48_000), 48_000).unwrap();
        let out = resample(&clip, 32_000).unwrap();
        let n = 8192;
        let fft = RealFft::new(n).unwrap();
        let start = 4000;
        let frame: Vec<f64> = out.samples()[start..start + n]
            .iter()
            .enumerate()
            .map(|(i, &s)| f64::from(s) * (0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64)))
            .collect();
        let mut power = vec![0.0; fft.bins()];
        fft.power_spectrum(&frame, &mut Vec::new(), &mut power);
        let peak = power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let expected = 1000.0 * n as f64 / 32_000.0;
        assert!((peak as f64 - expected).abs() <= 1.0, "peak bin {peak}, expected {expected}");
    }

    #[test]
    fn amplitude_preserved_in_passband() {
        let clip = AudioClip::new(sine(1000.0, 48_000, 48_000), 48_000).unwrap();
        let out = resample(&clip, 32_000).unwrap();
        let expected = sine(1000.0, 32_000, 32_000);
        for (i, (got, want)) in out.samples().iter().zip(&expected).enumerate().take(31_000).skip(1000) {
            assert!((got - want).abs() < 1e-3, "sample {i}");
        }
    }

    #[test]
    fn phases_have_unity_gain() {
        let r = Resampler::new(48_000, 32_000).unwrap();
        for p in r.phases.chunks(TAPS_PER_PHASE) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bessel_reference_values() {
        // I0(1) and I0(5) to 12 significant digits
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008).abs() < 1e-12);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_44).abs() < 1e-10);
    }
}
