//! Feature tracks, audio buffers and gradient containers.

use std::fmt;

use crate::config::VocoderConfig;

/// Acoustic features for one 128-sample frame.
///
/// `v` is the natural-log magnitude of the vocal-tract filter, so the linear
/// magnitude at bin `k` is `v[k].exp()`. An `f0` of zero marks an unvoiced
/// frame: no impulses are rendered for it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub f0: f64,
    pub p: Vec<f64>,
    pub v: Vec<f64>,
}

impl FeatureFrame {
    pub fn new(f0: f64, p: Vec<f64>, v: Vec<f64>) -> Self {
        FeatureFrame { f0, p, v }
    }

    /// A frame with constant periodicity and a flat filter.
    pub fn flat(config: &VocoderConfig, f0: f64, p: f64, v: f64) -> Self {
        FeatureFrame {
            f0,
            p: vec![p; config.periodicity_dims],
            v: vec![v; config.spectrum_bins],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTrack {
    pub frames: Vec<FeatureFrame>,
}

impl FeatureTrack {
    pub fn new(frames: Vec<FeatureFrame>) -> Self {
        FeatureTrack { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn f0(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.f0).collect()
    }
}

impl FromIterator<FeatureFrame> for FeatureTrack {
    fn from_iter<I: IntoIterator<Item = FeatureFrame>>(iter: I) -> Self {
        FeatureTrack::new(iter.into_iter().collect())
    }
}

/// Mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        AudioBuffer {
            samples,
            sample_rate_hz,
        }
    }

    pub fn silence(len: usize, sample_rate_hz: u32) -> Self {
        AudioBuffer::new(vec![0.0; len], sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let energy: f64 = self.samples.iter().map(|x| x * x).sum();
        (energy / self.samples.len() as f64).sqrt()
    }
}

/// Per-frame derivatives of a scalar loss with respect to `p` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTrack {
    pub d_p: Vec<Vec<f64>>,
    pub d_v: Vec<Vec<f64>>,
}

impl GradientTrack {
    pub fn zeros(frames: usize, config: &VocoderConfig) -> Self {
        GradientTrack {
            d_p: vec![vec![0.0; config.periodicity_dims]; frames],
            d_v: vec![vec![0.0; config.spectrum_bins]; frames],
        }
    }

    pub fn len(&self) -> usize {
        self.d_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_v.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.d_p
            .iter()
            .chain(self.d_v.iter())
            .flatten()
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    F0,
    P,
    V,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::F0 => "f0",
            Field::P => "p",
            Field::V => "v",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    OutOfRange,
    NotFinite,
    AboveNyquist,
    WrongDimension,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::OutOfRange => "out-of-range",
            Reason::NotFinite => "not finite",
            Reason::AboveNyquist => "at or above Nyquist",
            Reason::WrongDimension => "wrong dimension",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub frame: usize,
    pub field: Field,
    pub reason: Reason,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frame {}: {} {}", self.frame, self.field, self.reason)
    }
}

/// Checks every frame against the config. An empty result means the track is
/// safe to synthesize. At most one violation is reported per field per frame.
pub fn validate_track(track: &FeatureTrack, config: &VocoderConfig) -> Vec<Violation> {
    let nyquist = config.sample_rate_hz as f64 / 2.0;
    let mut out = Vec::new();
    for (frame, ff) in track.frames.iter().enumerate() {
        let mut push = |field, reason| {
            out.push(Violation {
                frame,
                field,
                reason,
            })
        };

        if !ff.f0.is_finite() {
            push(Field::F0, Reason::NotFinite);
        } else if ff.f0 < 0.0 {
            push(Field::F0, Reason::OutOfRange);
        } else if ff.f0 >= nyquist {
            push(Field::F0, Reason::AboveNyquist);
        }

        if ff.p.len() != config.periodicity_dims {
            push(Field::P, Reason::WrongDimension);
        } else if ff.p.iter().any(|p| !p.is_finite()) {
            push(Field::P, Reason::NotFinite);
        } else if ff.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
            push(Field::P, Reason::OutOfRange);
        }

        if ff.v.len() != config.spectrum_bins {
            push(Field::V, Reason::WrongDimension);
        } else if ff.v.iter().any(|v| !v.is_finite()) {
            push(Field::V, Reason::NotFinite);
        }
    }
    out
}
