//! Binary feature file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! offset  size  field
//!      0     8  magic "DDSPFEAT"
//!      8     4  format version (u32, currently 1)
//!     12     4  frame count (u32)
//!     16     4  periodicity dims (u32)
//!     20     4  filter dims (u32)
//!     24     4  sample rate (u32)
//!     28     4  frame shift (u32)
//!     32     -  frames: f0, p[..], v[..] as f32
//! ```
//!
//! Values are stored as `f32`. A track whose values are all exactly
//! representable in `f32` round-trips bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::config::VocoderConfig;
use crate::error::{Error, Result};
use crate::track::{FeatureFrame, FeatureTrack};

pub const MAGIC: &[u8; 8] = b"DDSPFEAT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHeader {
    pub version: u32,
    pub frames: u32,
    pub periodicity_dims: u32,
    pub filter_dims: u32,
    pub sample_rate_hz: u32,
    pub frame_shift: u32,
}

impl FeatureHeader {
    pub fn floats_per_frame(&self) -> usize {
        1 + self.periodicity_dims as usize + self.filter_dims as usize
    }
}

fn dims_of(track: &FeatureTrack, config: &VocoderConfig) -> Result<(usize, usize)> {
    let (pd, vd) = track
        .frames
        .first()
        .map(|f| (f.p.len(), f.v.len()))
        .unwrap_or((config.periodicity_dims, config.spectrum_bins));
    if track
        .frames
        .iter()
        .any(|f| f.p.len() != pd || f.v.len() != vd)
    {
        return Err(Error::invalid("all frames must share the same dimensions"));
    }
    Ok((pd, vd))
}

pub fn encode_features(track: &FeatureTrack, config: &VocoderConfig) -> Result<Vec<u8>> {
    let (pd, vd) = dims_of(track, config)?;
    let frames = u32::try_from(track.len()).map_err(|_| Error::invalid("too many frames"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + track.len() * (1 + pd + vd) * 4);
    out.extend_from_slice(MAGIC);
    for word in [
        VERSION,
        frames,
        pd as u32,
        vd as u32,
        config.sample_rate_hz,
        config.frame_shift as u32,
    ] {
        out.extend_from_slice(&word.to_le_bytes());
    }
    for f in &track.frames {
        for x in std::iter::once(&f.f0).chain(&f.p).chain(&f.v) {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<(FeatureHeader, FeatureTrack)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "feature file is {} bytes, shorter than its {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format("bad magic, not a DDSPFEAT file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
    let header = FeatureHeader {
        version: word(0),
        frames: word(1),
        periodicity_dims: word(2),
        filter_dims: word(3),
        sample_rate_hz: word(4),
        frame_shift: word(5),
    };
    if header.version != VERSION {
        return Err(Error::Format(format!(
            "unsupported feature file version {}",
            header.version
        )));
    }
    let per_frame = header.floats_per_frame();
    let expected = (header.frames as usize)
        .checked_mul(per_frame * 4)
        .ok_or_else(|| Error::Format("frame count overflows".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(Error::Format(format!(
            "body is {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let pd = header.periodicity_dims as usize;
    let frames = body
        .chunks_exact(per_frame * 4)
        .map(|chunk| {
            let vals: Vec<f64> = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect();
            FeatureFrame::new(vals[0], vals[1..1 + pd].to_vec(), vals[1 + pd..].to_vec())
        })
        .collect();
    Ok((header, frames))
}

pub fn write_features(
    path: impl AsRef<Path>,
    track: &FeatureTrack,
    config: &VocoderConfig,
) -> Result<()> {
    let bytes = encode_features(track, config)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<(FeatureHeader, FeatureTrack)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_features(&bytes)
}
