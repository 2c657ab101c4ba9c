//! RIFF/WAVE reader and writer for 16-bit mono PCM.

use std::fs;
use std::path::Path;

use crate::signal::Waveform;
use crate::{Error, Result};

const PCM_SCALE: f64 = 32768.0;

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses an in-memory WAV file. Unknown chunks are skipped.
pub fn parse_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotRiff);
    }
    let mut pos = 12;
    let mut sample_rate = None;
    loop {
        if pos + 8 > bytes.len() {
            return Err(Error::TruncatedFile("no data chunk".into()));
        }
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let available = bytes.len() - body;
        match id {
            b"fmt " => {
                if size < 16 || available < 16 {
                    return Err(Error::TruncatedFile("fmt chunk".into()));
                }
                let format = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                if format != 1 {
                    return Err(Error::UnsupportedFormat(format!("format code {format}")));
                }
                if channels != 1 {
                    return Err(Error::UnsupportedFormat(format!("{channels} channels")));
                }
                if bits != 16 {
                    return Err(Error::UnsupportedFormat(format!("{bits}-bit samples")));
                }
                sample_rate = Some(rate);
            }
            b"data" => {
                let rate = sample_rate.ok_or_else(|| {
                    Error::UnsupportedFormat("data chunk before fmt chunk".into())
                })?;
                if size > available {
                    return Err(Error::TruncatedFile(format!(
                        "data chunk declares {size} bytes, {available} present"
                    )));
                }
                let samples = bytes[body..body + size - size % 2]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / PCM_SCALE)
                    .collect();
                return Waveform::new(samples, rate);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + size % 2;
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes)
}

/// Rounds to the nearest 16-bit code, saturating at full scale.
pub fn quantize(sample: f64) -> i16 {
    (sample * PCM_SCALE)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Canonical 44-byte header followed by the PCM data.
pub fn encode_wav(x: &Waveform) -> Vec<u8> {
    let data_len = (x.len() * 2) as u32;
    let rate = x.sample_rate();
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in x.samples() {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, x: &Waveform) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(x)).map_err(|e| Error::io(path, e))
}
