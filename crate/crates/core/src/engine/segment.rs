use alloc::string::String;
use alloc::vec::Vec;

use crate::audio::AudioClip;

/// Failure reading from an audio source.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("audio source error: {0}")]
pub struct SourceError(pub String);

/// Pull-based mono PCM source.
///
/// `read` fills a prefix of `buf` and returns how many samples it wrote.
/// Returning 0 signals end of stream. A live source that has no samples yet
/// blocks instead of returning early.
pub trait SampleSource {
    /// Sample rate in Hz.
    fn sample_rate(&self) -> u32;

    /// Reads up to `buf.len()` samples.
    fn read(&mut self, buf: &mut [f32]) -> Result<usize, SourceError>;
}

/// Replays an in-memory buffer.
#[derive(Debug, Clone)]
pub struct SliceSource<'a> {
    samples: &'a [f32],
    rate: u32,
    pos: usize,
}

impl<'a> SliceSource<'a> {
    /// Source over `samples` at `rate` Hz.
    pub fn new(samples: &'a [f32], rate: u32) -> Self {
        Self { samples, rate, pos: 0 }
    }
}

impl SampleSource for SliceSource<'_> {
    fn sample_rate(&self) -> u32 {
        self.rate
    }

    fn read(&mut self, buf: &mut [f32]) -> Result<usize, SourceError> {
        let n = buf.len().min(self.samples.len() - self.pos);
        buf[..n].copy_from_slice(&self.samples[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

/// One fixed-length window of the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// 0-based position in the stream.
    pub index: u64,
    /// Offset of the first sample in the stream.
    pub start_sample: u64,
    /// Window samples, zero-padded when `partial`.
    pub clip: AudioClip,
    /// True when the stream ended inside this window.
    pub partial: bool,
    /// Number of real (non-padding) samples.
    pub valid_samples: usize,
}

/// Splits a source into windows of `window` samples advancing by `hop`.
///
/// The number of segments for a finite stream of `n > 0` samples is
/// `ceil(max(n - window, 0) / hop) + 1`; only the last may be partial.
pub struct Segmenter<S> {
    source: S,
    window: usize,
    hop: usize,
    buf: Vec<f32>,
    filled: usize,
    next_index: u64,
    next_start: u64,
    done: bool,
}

impl<S: SampleSource> Segmenter<S> {
    /// Window and hop in seconds, converted at the source rate (rounded).
    pub fn new(source: S, segment_seconds: f64, hop_seconds: f64) -> Self {
        let rate = f64::from(source.sample_rate());
        let window = (crate::math::round_half_away(segment_seconds * rate) as usize).max(1);
        let hop = (crate::math::round_half_away(hop_seconds * rate) as usize).clamp(1, window);
        Self::with_samples(source, window, hop)
    }

    /// Window and hop in samples (`1 ≤ hop ≤ window`).
    pub fn with_samples(source: S, window: usize, hop: usize) -> Self {
        let window = window.max(1);
        let hop = hop.clamp(1, window);
        Self { source, window, hop, buf: alloc::vec![0.0; window], filled: 0, next_index: 0, next_start: 0, done: false }
    }

    /// Window length in samples.
    pub fn window(&self) -> usize {
        self.window
    }

    /// Hop in samples.
    pub fn hop(&self) -> usize {
        self.hop
    }

    fn fill(&mut self) -> Result<usize, SourceError> {
        let mut added = 0;
        while self.filled < self.window {
            let n = self.source.read(&mut self.buf[self.filled..])?;
            if n == 0 {
                self.done = true;
                break;
            }
            self.filled += n;
            added += n;
        }
        Ok(added)
    }
}

impl<S: SampleSource> Iterator for Segmenter<S> {
    type Item = Result<Segment, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.next_index > 0 {
            // keep the overlap with the previous window
            let keep = self.filled.saturating_sub(self.hop);
            self.buf.copy_within(self.filled - keep..self.filled, 0);
            self.filled = keep;
        }
        let added = match self.fill() {
            Ok(n) => n,
            Err(e) => {
                self.done = true;
                return Some(Err(e));
            }
        };
        if added == 0 {
            self.done = true;
            return None;
        }
        let valid = self.filled;
        let mut samples = self.buf[..valid].to_vec();
        samples.resize(self.window, 0.0);
        let clip = match AudioClip::new(samples, self.source.sample_rate()) {
            Ok(c) => c,
            Err(e) => {
                self.done = true;
                return Some(Err(SourceError(alloc::format!("{e}"))));
            }
        };
        let seg =
            Segment { index: self.next_index, start_sample: self.next_start, clip, partial: valid < self.window, valid_samples: valid };
        self.next_index += 1;
        self.next_start += self.hop as u64;
        Some(Ok(seg))
    }
}
