//! Slow, direct implementation of the species front-end.
//!
//! Every stage is evaluated from its defining formula: windowed-sinc
//! interpolation per output sample, a direct DFT per frame, and Slaney mel
//! triangles computed per bin. Nothing here is shared with the library.

use std::f64::consts::PI;

pub const FS: u32 = 32_000;
pub const N_FFT: usize = 512;
pub const HOP: usize = 512;
pub const N_MELS: usize = 128;
pub const FRAMES: usize = 1000;
pub const MU: f64 = -4.2677393;
pub const SIGMA: f64 = 4.5689974;
const HALF_WIDTH: f64 = 32.0;
const BETA: f64 = 14.77;

fn i0(x: f64) -> f64 {
    // power series, summed until terms vanish
    let mut total = 0.0;
    let mut fact = 1.0;
    for k in 0..200 {
        if k > 0 {
            fact *= k as f64;
        }
        let term = (x / 2.0).powi(2 * k) / (fact * fact);
        total += term;
        if term < 1e-18 * total {
            break;
        }
    }
    total
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Band-limited interpolation at `t = n · from / to` using the input
/// samples with `t - 32 < k ≤ t + 32`, weights normalized to sum to one.
pub fn resample(x: &[f32], from: u32, to: u32) -> Vec<f64> {
    if from == to {
        return x.iter().map(|&v| f64::from(v)).collect();
    }
    let g = gcd(u64::from(from), u64::from(to));
    let (l, m) = (u64::from(to) / g, u64::from(from) / g);
    let cutoff = (to as f64 / from as f64).min(1.0);
    let n_out = ((x.len() as f64) * f64::from(to) / f64::from(from)).round() as usize;
    let i0b = i0(BETA);
    (0..n_out)
        .map(|n| {
            let num = n as u64 * m;
            let base = (num / l) as i64;
            let frac = (num % l) as f64 / l as f64;
            let t = base as f64 + frac;
            let (mut acc, mut wsum) = (0.0, 0.0);
            for k in (base - 31)..=(base + 32) {
                let u = t - k as f64;
                let r = u / HALF_WIDTH;
                let win = if r.abs() <= 1.0 { i0(BETA * (1.0 - r * r).sqrt()) / i0b } else { 0.0 };
                let arg = cutoff * u;
                let sinc = if arg == 0.0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
                let h = cutoff * sinc * win;
                wsum += h;
                if k >= 0 && (k as usize) < x.len() {
                    acc += f64::from(x[k as usize]) * h;
                }
            }
            acc / wsum
        })
        .collect()
}

pub fn hz_to_mel(f: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    if f < min_log_hz {
        f / f_sp
    } else {
        min_log_hz / f_sp + (f / min_log_hz).ln() / (6.4f64.ln() / 27.0)
    }
}

pub fn mel_to_hz(m: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_mel = 1000.0 / f_sp;
    if m < min_log_mel {
        m * f_sp
    } else {
        1000.0 * ((6.4f64.ln() / 27.0) * (m - min_log_mel)).exp()
    }
}

/// Triangular filters with edges equally spaced in mel from 0 Hz to
/// Nyquist, each side at least one bin wide, area-normalized.
pub fn filterbank(sr: u32, n_fft: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let bins = n_fft / 2 + 1;
    let df = f64::from(sr) / n_fft as f64;
    let top = hz_to_mel(f64::from(sr) / 2.0);
    let edge = |i: usize| mel_to_hz(top * i as f64 / (n_mels + 1) as f64);
    (0..n_mels)
        .map(|m| {
            let c = edge(m + 1);
            let left = edge(m).min(c - df);
            let right = edge(m + 2).max(c + df);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * df;
                    let tri = if f <= left || f >= right {
                        0.0
                    } else if f <= c {
                        (f - left) / (c - left)
                    } else {
                        (right - f) / (right - c)
                    };
                    tri * 2.0 / (right - left)
                })
                .collect()
        })
        .collect()
}

fn reflect(i: i64, n: usize) -> usize {
    // numpy "reflect": ... 2 1 | 0 1 2 ... n-1 | n-2 ...
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
    }
    i as usize
}

/// Mel power `[band][frame]` from a direct DFT of centered, periodic-Hann
/// windowed frames.
pub fn mel_power(x: &[f64], sr: u32, n_fft: usize, hop: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let fb = filterbank(sr, n_fft, n_mels);
    let frames = 1 + x.len() / hop;
    let bins = n_fft / 2 + 1;
    let cos: Vec<f64> = (0..n_fft).map(|j| (2.0 * PI * j as f64 / n_fft as f64).cos()).collect();
    let sin: Vec<f64> = (0..n_fft).map(|j| (2.0 * PI * j as f64 / n_fft as f64).sin()).collect();
    let mut out = vec![vec![0.0; frames]; n_mels];
    let mut frame = vec![0.0; n_fft];
    let mut power = vec![0.0; bins];
    for t in 0..frames {
        for (i, v) in frame.iter_mut().enumerate() {
            let idx = reflect((t * hop + i) as i64 - (n_fft / 2) as i64, x.len());
            let hann = 0.5 * (1.0 - cos[i]);
            *v = x[idx] * hann;
        }
        for (k, p) in power.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in frame.iter().enumerate() {
                let w = (k * j) % n_fft;
                re += v * cos[w];
                im -= v * sin[w];
            }
            *p = re * re + im * im;
        }
        for (row, dst) in fb.iter().zip(out.iter_mut()) {
            dst[t] = row.iter().zip(&power).map(|(a, b)| a * b).sum();
        }
    }
    out
}

/// 10·log10 relative to the spectrogram maximum, clipped to [-80, 0].
pub fn to_db(power: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let amin = 1e-10;
    let peak = power.iter().flatten().copied().fold(0.0, f64::max);
    power
        .iter()
        .map(|row| {
            row.iter()
                .map(|&p| if peak <= amin { -80.0 } else { (10.0 * p.max(amin).log10() - 10.0 * peak.log10()).clamp(-80.0, 0.0) })
                .collect()
        })
        .collect()
}

pub fn quantize(db: f64) -> u8 {
    // f64::round rounds half away from zero
    ((db + 80.0) / 80.0 * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn dequantize(q: u8) -> f64 {
    f64::from(q) / 255.0 * 80.0 - 80.0
}

pub struct Reference {
    pub codes: Vec<Vec<u8>>,
    pub normalized: Vec<Vec<f64>>,
}

/// Whole chain: resample → mel → dB → 8 bit → dB → wrap/truncate → (x-μ)/2σ.
pub fn species_chain(x: &[f32], rate: u32) -> Reference {
    let y = resample(x, rate, FS);
    let db = to_db(&mel_power(&y, FS, N_FFT, HOP, N_MELS));
    let codes: Vec<Vec<u8>> = db.iter().map(|r| r.iter().map(|&v| quantize(v)).collect()).collect();
    let normalized = codes.iter().map(|r| (0..FRAMES).map(|t| (dequantize(r[t % r.len()]) - MU) / (2.0 * SIGMA)).collect()).collect();
    Reference { codes, normalized }
}
