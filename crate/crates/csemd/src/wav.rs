//! 16-bit PCM mono WAV (RIFF/WAVE, format code 1, little-endian).

use std::path::Path;

use csemd_core::framing::AudioSignal;

use crate::error::{read_file, write_file};
use crate::{Error, Result};

const FULL_SCALE: f64 = 32768.0;
const PCM: u16 = 1;
const EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavFormat {
    pub format_code: u16,
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WavError {
    Malformed(String),
    Unsupported(String),
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

/// Splits a RIFF/WAVE file into its format and raw PCM bytes.
pub fn parse(bytes: &[u8]) -> std::result::Result<(WavFormat, &[u8]), WavError> {
    let bad = |s: &str| WavError::Malformed(s.into());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header"));
    }
    let mut fmt = None;
    let mut data = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(size).filter(|&e| e <= bytes.len());
        match id {
            b"fmt " => {
                let end = end.ok_or_else(|| bad("truncated fmt chunk"))?;
                if size < 16 {
                    return Err(bad("fmt chunk shorter than 16 bytes"));
                }
                let c = &bytes[body..end];
                fmt = Some(WavFormat {
                    format_code: u16_at(c, 0),
                    channels: u16_at(c, 2),
                    sample_rate: u32_at(c, 4),
                    bits_per_sample: u16_at(c, 14),
                });
                if u16_at(c, 0) == EXTENSIBLE && size >= 26 {
                    // the real format code heads the sub-format GUID
                    fmt.as_mut().unwrap().format_code = u16_at(c, 24);
                }
            }
            b"data" => {
                // some writers leave the size of a streamed data chunk unset
                let end = end.unwrap_or(bytes.len());
                data = Some(&bytes[body..end]);
                break;
            }
            _ => {}
        }
        pos = body.saturating_add(size).saturating_add(size & 1);
    }
    let fmt = fmt.ok_or_else(|| bad("no fmt chunk"))?;
    let data = data.ok_or_else(|| bad("no data chunk"))?;
    if fmt.sample_rate == 0 {
        return Err(bad("sample rate is zero"));
    }
    if fmt.format_code != PCM {
        return Err(WavError::Unsupported(format!("format code {}, need PCM (1)", fmt.format_code)));
    }
    if fmt.channels != 1 {
        return Err(WavError::Unsupported(format!("{} channels, need mono", fmt.channels)));
    }
    if fmt.bits_per_sample != 16 {
        return Err(WavError::Unsupported(format!("{}-bit samples, need 16-bit", fmt.bits_per_sample)));
    }
    if data.len() % 2 != 0 {
        return Err(bad("odd number of data bytes"));
    }
    Ok((fmt, data))
}

pub fn decode(bytes: &[u8]) -> std::result::Result<AudioSignal, WavError> {
    let (fmt, data) = parse(bytes)?;
    let samples =
        data.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / FULL_SCALE).collect();
    AudioSignal::new(samples, fmt.sample_rate).map_err(|e| WavError::Malformed(e.to_string()))
}

/// Nearest 16-bit code; amplitudes outside `[-1, 1]` are clipped.
pub fn quantize(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * FULL_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Canonical 44-byte header followed by the samples.
pub fn encode(signal: &AudioSignal) -> std::result::Result<Vec<u8>, String> {
    if signal.samples.iter().any(|v| !v.is_finite()) {
        return Err("non-finite sample".into());
    }
    let data_len = u32::try_from(signal.samples.len() * 2)
        .ok()
        .filter(|&n| n <= u32::MAX - 36)
        .ok_or("too many samples for a WAV file")?;
    let rate = signal.sample_rate;
    let byte_rate = rate.checked_mul(2).ok_or("sample rate too large")?;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &v in &signal.samples {
        out.extend_from_slice(&quantize(v).to_le_bytes());
    }
    Ok(out)
}

pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    decode(&read_file(path)?).map_err(|e| match e {
        WavError::Malformed(reason) => Error::format(path, reason),
        WavError::Unsupported(reason) => Error::Unsupported { path: path.to_path_buf(), reason },
    })
}

pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    let bytes = encode(signal).map_err(|r| Error::format(path, r))?;
    write_file(path, &bytes)
}
