use alloc::vec::Vec;
use core::f64::consts::PI;

use super::AudioError;

/// Radix-2 FFT plan for real frames of a fixed power-of-two length.
#[derive(Debug, Clone)]
pub struct RealFft {
    n: usize,
    twiddles: Vec<(f64, f64)>,
    bitrev: Vec<usize>,
}

impl RealFft {
    /// Plans an `n`-point transform; `n` must be a power of two ≥ 2.
    pub fn new(n: usize) -> Result<Self, AudioError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(AudioError::Config(alloc::format!("FFT size {n} is not a power of two")));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n).map(|i| i.reverse_bits() >> (usize::BITS - bits)).collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                (crate::math::cos(a), crate::math::sin(a))
            })
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    /// Transform length.
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false; plans have at least two points.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of non-negative frequency bins, `n / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.n / 2 + 1
    }

    /// Writes `|X[k]|²` for `k in 0..=n/2` into `out`.
    ///
    /// `scratch` is resized as needed and can be reused across calls.
    pub fn power_spectrum(&self, frame: &[f64], scratch: &mut Vec<(f64, f64)>, out: &mut [f64]) {
        assert_eq!(frame.len(), self.n);
        assert_eq!(out.len(), self.bins());
        scratch.clear();
        scratch.resize(self.n, (0.0, 0.0));
        for (i, &j) in self.bitrev.iter().enumerate() {
            scratch[j] = (frame[i], 0.0);
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let (wr, wi) = self.twiddles[k * stride];
                    let (br, bi) = scratch[start + k + half];
                    let tr = br * wr - bi * wi;
                    let ti = br * wi + bi * wr;
                    let (ar, ai) = scratch[start + k];
                    scratch[start + k] = (ar + tr, ai + ti);
                    scratch[start + k + half] = (ar - tr, ai - ti);
                }
            }
            len <<= 1;
        }
        for (o, &(re, im)) in out.iter_mut().zip(scratch.iter()) {
            *o = re * re + im * im;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive_power(frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &x) in frame.iter().enumerate() {
                    let a = -2.0 * PI * (k * t) as f64 / n as f64;
                    re += x * libm::cos(a);
                    im += x * libm::sin(a);
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn matches_direct_dft() {
        let frame: Vec<f64> = (0..64).map(|i| libm::sin(i as f64 * 0.37) + (i % 5) as f64 * 0.1).collect();
        let fft = RealFft::new(64).unwrap();
        let mut out = vec![0.0; fft.bins()];
        fft.power_spectrum(&frame, &mut Vec::new(), &mut out);
        for (a, b) in out.iter().zip(naive_power(&frame)) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(RealFft::new(500).is_err());
        assert!(RealFft::new(1).is_err());
    }
}
