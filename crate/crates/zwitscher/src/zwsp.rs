//! ZWSP container for quantized mel spectrograms.
//!
//! ```text
//! offset size field
//!      0    4 magic "ZWSP"
//!      4    2 version (1)
//!      6    2 n_mels
//!      8    4 n_frames
//!     12    4 sample_rate
//!     16    2 hop
//!     18    2 n_fft
//!     20    2 db_floor (i16, dB)
//!     22    2 db_ceil (i16, dB)
//!     24    . n_mels * n_frames codes, mel-band major
//! ```
//! All multibyte fields are little-endian.

use zwitscher_core::{MelConfig, QuantizedSpectrogram};

pub const MAGIC: &[u8; 4] = b"ZWSP";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ZwspError {
    #[error("file shorter than the {HEADER_LEN}-byte header")]
    Truncated,
    #[error("bad magic {0:?}")]
    Magic([u8; 4]),
    #[error("unsupported version {0}")]
    Version(u16),
    #[error("payload has {actual} bytes, header promises {expected}")]
    Length { expected: usize, actual: usize },
    #[error("{0} does not fit the header field")]
    Field(&'static str),
    #[error("dB bound {0} is not an integer")]
    Bound(f64),
    #[error(transparent)]
    Audio(#[from] zwitscher_core::AudioError),
}

fn narrow<T: TryFrom<usize>>(v: usize, name: &'static str) -> Result<T, ZwspError> {
    T::try_from(v).map_err(|_| ZwspError::Field(name))
}

fn db(v: f64) -> Result<i16, ZwspError> {
    if v.fract() != 0.0 || v < f64::from(i16::MIN) || v > f64::from(i16::MAX) {
        return Err(ZwspError::Bound(v));
    }
    Ok(v as i16)
}

/// Serializes `q`; fails if a config value does not fit its field.
pub fn encode(q: &QuantizedSpectrogram) -> Result<Vec<u8>, ZwspError> {
    let c = q.config();
    let mut out = Vec::with_capacity(HEADER_LEN + q.codes().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(c.n_mels, "n_mels")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u32>(q.n_frames(), "n_frames")?.to_le_bytes());
    out.extend_from_slice(&c.sample_rate.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(c.hop, "hop")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(c.n_fft, "n_fft")?.to_le_bytes());
    out.extend_from_slice(&db(c.db_floor)?.to_le_bytes());
    out.extend_from_slice(&db(c.db_ceil)?.to_le_bytes());
    out.extend_from_slice(q.codes());
    Ok(out)
}

/// Parses a ZWSP buffer.
pub fn decode(bytes: &[u8]) -> Result<QuantizedSpectrogram, ZwspError> {
    if bytes.len() < HEADER_LEN {
        return Err(ZwspError::Truncated);
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
    if &magic != MAGIC {
        return Err(ZwspError::Magic(magic));
    }
    let version = u16_at(4);
    if version != VERSION {
        return Err(ZwspError::Version(version));
    }
    let n_mels = usize::from(u16_at(6));
    let n_frames = u32_at(8) as usize;
    let config = MelConfig {
        sample_rate: u32_at(12),
        n_mels,
        n_fft: usize::from(u16_at(18)),
        hop: usize::from(u16_at(16)),
        db_floor: f64::from(u16_at(20) as i16),
        db_ceil: f64::from(u16_at(22) as i16),
    };
    let expected = n_mels * n_frames;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(ZwspError::Length { expected, actual: payload.len() });
    }
    config.validate()?;
    Ok(QuantizedSpectrogram::from_codes(payload.to_vec(), n_frames, config)?)
}
