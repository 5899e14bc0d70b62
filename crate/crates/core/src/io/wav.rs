//! Mono 16-bit PCM WAV reading and writing.
//!
//! Samples are clipped to `[-1, 1]`, scaled by 32767 and rounded half away
//! from zero. Reading divides by 32767.

use std::path::Path;

use crate::error::{Error, Result};
use crate::track::AudioBuffer;

pub const PCM_SCALE: f64 = 32767.0;

pub fn quantize(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * PCM_SCALE).round() as i16
}

fn spec(sample_rate_hz: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

fn wav_error(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Format(other.to_string()),
    }
}

pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let mut writer =
        hound::WavWriter::create(path, spec(audio.sample_rate_hz)).map_err(wav_error)?;
    for &x in &audio.samples {
        writer.write_sample(quantize(x)).map_err(wav_error)?;
    }
    writer.finalize().map_err(wav_error)
}

/// Reads a mono 16-bit PCM file. Other layouts are a format error.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let reader = hound::WavReader::open(path).map_err(wav_error)?;
    let s = reader.spec();
    if s.channels != 1 || s.bits_per_sample != 16 || s.sample_format != hound::SampleFormat::Int {
        return Err(Error::Format(format!(
            "expected mono 16-bit PCM, got {} channel(s) at {} bits",
            s.channels, s.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / PCM_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(wav_error)?;
    Ok(AudioBuffer::new(samples, s.sample_rate))
}
