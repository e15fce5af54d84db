#![allow(dead_code)]

pub mod dsp;
pub mod metrics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded linear chirp with a little noise, amplitude within [-1, 1].
pub fn chirp(seed: u64, seconds: f64, rate: u32) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0: f64 = rng.gen_range(150.0..1500.0);
    let f1: f64 = rng.gen_range(4000.0..14000.0);
    let amp: f64 = rng.gen_range(0.3..0.8);
    let n = (seconds * f64::from(rate)) as usize;
    let k = (f1 - f0) / seconds;
    (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(rate);
            let phase = 2.0 * std::f64::consts::PI * (f0 * t + 0.5 * k * t * t);
            let noise: f64 = rng.gen_range(-0.01..0.01);
            (amp * phase.sin() + noise) as f32
        })
        .collect()
}
