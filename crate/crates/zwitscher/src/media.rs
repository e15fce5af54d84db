//! Image decoding and streaming PCM input.

use std::io::Read;
use std::path::Path;

use zwitscher_core::engine::{RgbImage, SampleSource, SourceError};

#[derive(Debug, thiserror::Error)]
pub enum MediaError {
    #[error("{path}: {source}")]
    Image { path: String, source: image::ImageError },
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
}

/// Decodes a PNG or JPEG into packed RGB.
pub fn read_image(path: &Path) -> Result<RgbImage, MediaError> {
    let img = image::open(path).map_err(|source| MediaError::Image { path: path.display().to_string(), source })?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    RgbImage::new(w, h, rgb.into_raw()).map_err(|e| MediaError::Invalid { path: path.display().to_string(), reason: e.to_string() })
}

/// Writes packed RGB as PNG.
pub fn write_png(path: &Path, img: &RgbImage) -> Result<(), MediaError> {
    image::save_buffer(path, img.as_bytes(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .map_err(|source| MediaError::Image { path: path.display().to_string(), source })
}

pub fn is_image(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(), Some("png" | "jpg" | "jpeg"))
}

/// Mono signed 16-bit little-endian PCM from a byte stream.
pub struct PcmSource<R> {
    reader: R,
    rate: u32,
    carry: Option<u8>,
    bytes: Vec<u8>,
}

impl<R: Read> PcmSource<R> {
    pub fn new(reader: R, rate: u32) -> Self {
        Self { reader, rate, carry: None, bytes: Vec::new() }
    }
}

impl<R: Read> SampleSource for PcmSource<R> {
    fn sample_rate(&self) -> u32 {
        self.rate
    }

    fn read(&mut self, buf: &mut [f32]) -> Result<usize, SourceError> {
        if buf.is_empty() {
            return Ok(0);
        }
        self.bytes.clear();
        self.bytes.extend(self.carry.take());
        let want = buf.len() * 2;
        let mut chunk = vec![0u8; want - self.bytes.len()];
        loop {
            let n = self.reader.read(&mut chunk).map_err(|e| SourceError(e.to_string()))?;
            if n == 0 {
                break;
            }
            self.bytes.extend_from_slice(&chunk[..n]);
            if self.bytes.len() >= 2 {
                break;
            }
            chunk.truncate(want - self.bytes.len());
        }
        if self.bytes.len() % 2 == 1 {
            self.carry = self.bytes.pop();
        }
        for (out, b) in buf.iter_mut().zip(self.bytes.chunks_exact(2)) {
            *out = f32::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0;
        }
        Ok(self.bytes.len() / 2)
    }
}
