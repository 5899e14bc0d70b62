//! Complexity accounting and real-time-factor measurement.

use std::fmt;
use std::time::Instant;

use crate::config::VocoderConfig;
use crate::error::{Error, Result};
use crate::synth::synthesize;
use crate::track::FeatureTrack;

/// Per-frame FLOP counts of the synthesis path.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopsReport {
    pub periodic_ifft: f64,
    pub noise_fft: f64,
    pub noise_ifft: f64,
    pub spectral_multiplies: f64,
    pub filter_exp: f64,
    pub extrapolation: f64,
    pub impulse_placement: f64,
    pub noise_scaling: f64,
    pub window: f64,
    pub overlap_add: f64,
    pub frames_per_second: f64,
    pub conventions: Vec<String>,
}

impl FlopsReport {
    pub fn stages(&self) -> [(&'static str, f64); 10] {
        [
            ("periodic_ifft", self.periodic_ifft),
            ("noise_fft", self.noise_fft),
            ("noise_ifft", self.noise_ifft),
            ("spectral_multiplies", self.spectral_multiplies),
            ("filter_exp", self.filter_exp),
            ("extrapolation", self.extrapolation),
            ("impulse_placement", self.impulse_placement),
            ("noise_scaling", self.noise_scaling),
            ("window", self.window),
            ("overlap_add", self.overlap_add),
        ]
    }

    pub fn flops_per_frame(&self) -> f64 {
        self.stages().iter().map(|(_, f)| f).sum()
    }

    pub fn mflops_total(&self) -> f64 {
        self.flops_per_frame() * self.frames_per_second / 1e6
    }

    pub fn fft_stages(&self) -> f64 {
        self.periodic_ifft + self.noise_fft + self.noise_ifft
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .stages()
            .iter()
            .map(|(k, v)| (format!("flops_per_frame_{k}"), format!("{v}")))
            .collect();
        out.push((
            "flops_per_frame".into(),
            format!("{}", self.flops_per_frame()),
        ));
        out.push((
            "frames_per_second".into(),
            format!("{}", self.frames_per_second),
        ));
        out.push(("mflops_total".into(), format!("{:.4}", self.mflops_total())));
        for (i, c) in self.conventions.iter().enumerate() {
            out.push((format!("convention_{i}"), c.clone()));
        }
        out
    }
}

impl fmt::Display for FlopsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.to_key_values() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Counts floating-point operations of one synthesized second.
///
/// Conventions (from `config.counting`): an N-point real FFT or inverse is
/// `5 N log2 N`, a complex bin multiply 6, one `exp` 1, a multiply-add 2.
/// Impulses per frame follow the nominal F0.
pub fn count_flops(config: &VocoderConfig) -> FlopsReport {
    let rules = &config.counting;
    let n = config.fft_size as f64;
    let bins = config.spectrum_bins as f64;
    let hop = config.frame_shift as f64;
    let fft = rules.fft_coefficient * n * n.log2();
    let impulses_per_frame = rules.nominal_f0_hz * hop / config.sample_rate_hz as f64;

    FlopsReport {
        periodic_ifft: fft,
        noise_fft: fft,
        noise_ifft: fft,
        // periodic: exp(v) * p (1 mul); aperiodic: 1 - p and exp(v) * (1 - p)
        // (2), then the complex noise spectrum times the filter (complex_mul)
        spectral_multiplies: bins * (1.0 + 2.0 + rules.complex_mul),
        filter_exp: bins * rules.exp_eval,
        // two interpolation taps per bin
        extrapolation: bins * 2.0 * rules.mac,
        // scale-and-add of the impulse response per impulse
        impulse_placement: impulses_per_frame * n * rules.mac,
        noise_scaling: hop,
        window: config.noise_window_size as f64,
        overlap_add: config.periodic_buffer_len as f64 + config.noise_window_size as f64,
        frames_per_second: config.frames_per_second(),
        conventions: vec![
            format!("fft={}*N*log2(N)", rules.fft_coefficient),
            format!("complex_mul={}", rules.complex_mul),
            format!("exp={}", rules.exp_eval),
            format!("mac={}", rules.mac),
            format!("nominal_f0_hz={}", rules.nominal_f0_hz),
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtfStats {
    pub samples: Vec<f64>,
    pub median: f64,
    pub p95: f64,
    pub audio_seconds: f64,
}

impl RtfStats {
    fn from_samples(mut samples: Vec<f64>, audio_seconds: f64) -> Self {
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        // nearest-rank percentile
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        let p95 = sorted[rank - 1];
        samples.shrink_to_fit();
        RtfStats {
            samples,
            median,
            p95,
            audio_seconds,
        }
    }
}

pub const WARMUP_RUNS: usize = 2;

/// Times whole-utterance synthesis on the calling thread.
///
/// RTF is wall-clock synthesis time over audio duration. `WARMUP_RUNS`
/// untimed runs precede the `repeats` timed ones.
pub fn bench_rtf(
    track: &FeatureTrack,
    config: &VocoderConfig,
    seed: u64,
    repeats: usize,
) -> Result<RtfStats> {
    if repeats < 3 {
        return Err(Error::invalid("bench_rtf needs at least 3 repeats"));
    }
    let audio_seconds = (track.len() * config.frame_shift) as f64 / config.sample_rate_hz as f64;
    if audio_seconds < 1.0 {
        return Err(Error::invalid(
            "bench_rtf needs at least one second of audio",
        ));
    }
    for _ in 0..WARMUP_RUNS {
        std::hint::black_box(synthesize(track, config, seed)?);
    }
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        std::hint::black_box(synthesize(std::hint::black_box(track), config, seed)?);
        samples.push(start.elapsed().as_secs_f64() / audio_seconds);
    }
    Ok(RtfStats::from_samples(samples, audio_seconds))
}
