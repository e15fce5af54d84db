//! PCM WAV decoding and a 16-bit writer.
//!
//! Other codecs are handed to an external `ffmpeg` process that emits
//! 32-bit float WAV on stdout.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use zwitscher_core::AudioClip;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unsupported WAV encoding: format {format}, {bits} bits")]
    Unsupported { format: u16, bits: u16 },
    #[error(transparent)]
    Audio(#[from] zwitscher_core::AudioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("external decoder: {0}")]
    Decoder(String),
}

fn malformed(offset: usize, reason: impl Into<String>) -> WavError {
    WavError::Malformed { offset, reason: reason.into() }
}

/// Decoded file before downmixing.
#[derive(Debug, Clone, PartialEq)]
pub struct Wav {
    pub sample_rate: u32,
    pub channels: u16,
    pub bits: u16,
    /// Interleaved samples scaled to `[-1, 1]`.
    pub samples: Vec<f32>,
}

impl Wav {
    /// Mono clip (channel average).
    pub fn into_clip(self) -> Result<AudioClip, WavError> {
        Ok(AudioClip::from_interleaved(&self.samples, usize::from(self.channels), self.sample_rate)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WavError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(malformed(self.pos, format!("truncated {what}")));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, WavError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, WavError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

struct Fmt {
    format: u16,
    channels: u16,
    rate: u32,
    bits: u16,
}

/// Parses a RIFF/WAVE byte buffer.
///
/// Accepts 16, 24 and 32-bit integer PCM and 32-bit float, including the
/// extensible header. Integers are scaled by `2^(bits-1)`, so the most
/// negative code maps to exactly -1.
pub fn parse_wav(bytes: &[u8]) -> Result<Wav, WavError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "RIFF tag")? != b"RIFF" {
        return Err(malformed(0, "missing RIFF tag"));
    }
    r.u32("RIFF size")?;
    if r.take(4, "WAVE tag")? != b"WAVE" {
        return Err(malformed(8, "missing WAVE tag"));
    }
    let mut fmt: Option<Fmt> = None;
    loop {
        if r.pos >= bytes.len() {
            return Err(malformed(r.pos, "no data chunk"));
        }
        let chunk_at = r.pos;
        let id = r.take(4, "chunk id")?;
        let size = r.u32("chunk size")? as usize;
        match id {
            b"fmt " => {
                let body_at = r.pos;
                if size < 16 {
                    return Err(malformed(chunk_at, format!("fmt chunk of {size} bytes")));
                }
                let mut f = Reader { bytes: r.take(size, "fmt chunk")?, pos: 0 };
                let mut format = f.u16("format")?;
                let channels = f.u16("channels")?;
                let rate = f.u32("sample rate")?;
                f.u32("byte rate")?;
                f.u16("block align")?;
                let bits = f.u16("bits per sample")?;
                if format == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(malformed(body_at, "extensible fmt chunk too short"));
                    }
                    f.pos = 24;
                    format = f.u16("sub-format")?;
                }
                if channels == 0 {
                    return Err(malformed(body_at + 2, "zero channels"));
                }
                if rate == 0 {
                    return Err(malformed(body_at + 4, "zero sample rate"));
                }
                fmt = Some(Fmt { format, channels, rate, bits });
            }
            b"data" => {
                let Some(fmt) = fmt else {
                    return Err(malformed(chunk_at, "data chunk before fmt chunk"));
                };
                let data_at = r.pos;
                // Streams written without a final size report 0 or u32::MAX.
                let size = if size == 0 || size == u32::MAX as usize { bytes.len() - data_at } else { size };
                let data = r.take(size, "data chunk")?;
                let samples = decode(data, &fmt, data_at)?;
                return Ok(Wav { sample_rate: fmt.rate, channels: fmt.channels, bits: fmt.bits, samples });
            }
            _ => {
                r.take(size + (size & 1), "chunk body")?;
            }
        }
        if id == b"fmt " && size & 1 == 1 {
            r.take(1, "pad byte")?;
        }
    }
}

fn decode(data: &[u8], fmt: &Fmt, offset: usize) -> Result<Vec<f32>, WavError> {
    let width = usize::from(fmt.bits / 8);
    let frame = width * usize::from(fmt.channels);
    if fmt.bits % 8 != 0 || width == 0 {
        return Err(WavError::Unsupported { format: fmt.format, bits: fmt.bits });
    }
    if data.len() % frame != 0 {
        return Err(malformed(offset + data.len() - data.len() % frame, "partial sample frame"));
    }
    let samples: Vec<f32> = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => data.chunks_exact(2).map(|b| f32::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0).collect(),
        (FORMAT_PCM, 24) => data.chunks_exact(3).map(|b| (i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8) as f32 / 8_388_608.0).collect(),
        (FORMAT_PCM, 32) => {
            data.chunks_exact(4).map(|b| (f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])) / 2_147_483_648.0) as f32).collect()
        }
        (FORMAT_FLOAT, 32) => data.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect(),
        (format, bits) => return Err(WavError::Unsupported { format, bits }),
    };
    if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
        return Err(malformed(offset + i * width, "non-finite float sample"));
    }
    Ok(samples)
}

/// Reads a WAV file, or any other file through `ffmpeg` when installed.
pub fn read_audio(path: &Path) -> Result<AudioClip, WavError> {
    let is_wav = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    let bytes = if is_wav { std::fs::read(path)? } else { ffmpeg_decode(path)? };
    parse_wav(&bytes)?.into_clip()
}

fn ffmpeg_decode(path: &Path) -> Result<Vec<u8>, WavError> {
    let out = Command::new("ffmpeg")
        .args(["-v", "error", "-nostdin", "-i"])
        .arg(path)
        .args(["-f", "wav", "-acodec", "pcm_f32le", "-"])
        .stdin(Stdio::null())
        .output()
        .map_err(|e| WavError::Decoder(format!("cannot run ffmpeg: {e}")))?;
    if !out.status.success() {
        return Err(WavError::Decoder(String::from_utf8_lossy(&out.stderr).trim().to_string()));
    }
    Ok(out.stdout)
}

/// Encodes mono samples as 16-bit PCM, clamping to `[-1, 1]`.
pub fn encode_wav16(samples: &[f32], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let v = (f64::from(s.clamp(-1.0, 1.0)) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Writes [`encode_wav16`] output to `path`.
pub fn write_wav16(path: &Path, samples: &[f32], sample_rate: u32) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_wav16(samples, sample_rate))?;
    f.sync_all()
}
