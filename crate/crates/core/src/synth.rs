//! Source-filter synthesis.
//!
//! Each frame renders two signals that are overlap-added at the frame shift:
//!
//! * periodic: the zero-phase filter `exp(v) * p` turned into an impulse
//!   response centred in a 512-sample buffer, placed at every impulse time of
//!   the running phase and scaled by `1 / sqrt(f0)`;
//! * aperiodic: a sliding 512-sample window of uniform noise, filtered by
//!   `exp(v) * (1 - p)` in the frequency domain and cut out with a 256-point
//!   Hann centred in the buffer.
//!
//! Both paths put frame content around buffer sample 256; the output drops
//! those 256 samples of latency so that frame `t` starts at `t * 128`.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::config::VocoderConfig;
use crate::error::{Error, Result};
use crate::fft::RealFft;
use crate::spectral::hann_window;
use crate::track::{validate_track, AudioBuffer, FeatureFrame, FeatureTrack};

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Linear map from band-wise periodicity to per-bin periodicity.
///
/// Band `j` of `d` is centred at mel `(j + 0.5) * mel(sr / 2) / d`. Bins
/// between two centres interpolate linearly; bins outside the first or last
/// centre copy the nearest band. Every row of the map is a convex
/// combination, so constants are preserved and `[0, 1]` maps into `[0, 1]`.
#[derive(Debug, Clone)]
pub struct PeriodicityMap {
    dims: usize,
    // per bin: (lower band, upper band, weight of upper band)
    taps: Vec<(usize, usize, f64)>,
    centers_bin: Vec<f64>,
}

impl PeriodicityMap {
    pub fn new(config: &VocoderConfig) -> Self {
        let dims = config.periodicity_dims;
        let nyquist = config.sample_rate_hz as f64 / 2.0;
        let mel_top = hz_to_mel(nyquist);
        let hz_per_bin = config.sample_rate_hz as f64 / config.fft_size as f64;
        let centers_bin: Vec<f64> = (0..dims)
            .map(|j| mel_to_hz((j as f64 + 0.5) * mel_top / dims as f64) / hz_per_bin)
            .collect();

        let taps = (0..config.spectrum_bins)
            .map(|k| {
                let x = k as f64;
                if x <= centers_bin[0] {
                    return (0, 0, 0.0);
                }
                if x >= centers_bin[dims - 1] {
                    return (dims - 1, dims - 1, 0.0);
                }
                let upper = centers_bin.iter().position(|&c| c > x).unwrap();
                let lower = upper - 1;
                let frac = (x - centers_bin[lower]) / (centers_bin[upper] - centers_bin[lower]);
                (lower, upper, frac)
            })
            .collect();

        PeriodicityMap {
            dims,
            taps,
            centers_bin,
        }
    }

    /// Band centres as fractional FFT bin positions.
    pub fn centers(&self) -> &[f64] {
        &self.centers_bin
    }

    pub fn bins(&self) -> usize {
        self.taps.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn apply_into(&self, bands: &[f64], out: &mut [f64]) {
        debug_assert_eq!(bands.len(), self.dims);
        for (o, &(lo, hi, frac)) in out.iter_mut().zip(&self.taps) {
            *o = bands[lo] * (1.0 - frac) + bands[hi] * frac;
        }
    }

    pub fn apply(&self, bands: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.taps.len()];
        self.apply_into(bands, &mut out);
        out
    }

    /// Transpose of the map: pulls a per-bin gradient back onto the bands.
    pub fn apply_transpose(&self, per_bin: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dims];
        for (g, &(lo, hi, frac)) in per_bin.iter().zip(&self.taps) {
            out[lo] += g * (1.0 - frac);
            out[hi] += g * frac;
        }
        out
    }

    /// Dense `bins x dims` matrix, mainly for tests.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.taps
            .iter()
            .map(|&(lo, hi, frac)| {
                let mut row = vec![0.0; self.dims];
                row[lo] += 1.0 - frac;
                row[hi] += frac;
                row
            })
            .collect()
    }
}

/// Extends 12 band periodicities to one value per linear-frequency bin.
pub fn extrapolate_periodicity(p_bands: &[f64], config: &VocoderConfig) -> Result<Vec<f64>> {
    if p_bands.len() != config.periodicity_dims {
        return Err(Error::invalid(format!(
            "expected {} periodicity bands, got {}",
            config.periodicity_dims,
            p_bands.len()
        )));
    }
    if p_bands.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("periodicity values must lie in [0, 1]"));
    }
    Ok(PeriodicityMap::new(config).apply(p_bands))
}

/// Uniform noise source backed by ChaCha8.
///
/// A sample is `((x >> 11) + 0.5) / 2^52 - 1` for the next 64-bit output
/// `x`, i.e. the midpoint of one of 2^53 equal cells spanning `(-1, 1)`.
/// ChaCha8 output for a given seed is fixed across platforms, so noise is
/// reproducible bit for bit.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        NoiseSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_uniform(&mut self) -> f64 {
        let cell = (self.rng.next_u64() >> 11) as f64;
        (cell + 0.5) / (1u64 << 52) as f64 - 1.0
    }
}

/// Per-utterance synthesis state.
#[derive(Debug, Clone)]
pub struct SynthState {
    /// Impulse phase in cycles, always in `[0, 1)`.
    pub running_phase: f64,
    /// The last `fft_size` noise samples.
    pub noise_buffer: Vec<f64>,
    noise: NoiseSource,
    noise_scale: f64,
    frame_shift: usize,
}

impl SynthState {
    /// Fresh state with phase 0. The noise buffer is pre-filled so that the
    /// first frame already sees a full window of noise.
    pub fn new(config: &VocoderConfig, seed: u64) -> Self {
        let mut state = SynthState {
            running_phase: 0.0,
            noise_buffer: vec![0.0; config.fft_size],
            noise: NoiseSource::new(seed),
            noise_scale: 1.0 / (config.sample_rate_hz as f64).sqrt(),
            frame_shift: config.frame_shift,
        };
        for i in config.frame_shift..config.fft_size {
            state.noise_buffer[i] = state.noise.next_uniform() * state.noise_scale;
        }
        state
    }

    /// Advances the phase across one frame and returns the sample offsets at
    /// which an impulse falls. An impulse is emitted at phase zero and at the
    /// first sample after every wrap.
    pub(crate) fn advance_phase(&mut self, f0: f64, sample_rate: f64) -> Vec<usize> {
        let inc = f0 / sample_rate;
        let mut offsets = Vec::new();
        if inc <= 0.0 {
            return offsets;
        }
        let mut phase = self.running_phase;
        for j in 0..self.frame_shift {
            if phase < inc {
                offsets.push(j);
            }
            phase += inc;
            if phase >= 1.0 {
                phase -= 1.0;
            }
        }
        self.running_phase = phase;
        offsets
    }

    /// Shifts the noise buffer by one frame and appends fresh noise.
    pub(crate) fn advance_noise(&mut self) {
        let hop = self.frame_shift;
        self.noise_buffer.copy_within(hop.., 0);
        let n = self.noise_buffer.len();
        for x in &mut self.noise_buffer[n - hop..] {
            *x = self.noise.next_uniform() * self.noise_scale;
        }
    }
}

/// Cached transforms and tables for one configuration.
#[derive(Debug, Clone)]
pub(crate) struct Renderer {
    pub(crate) config: VocoderConfig,
    pub(crate) plan: RealFft,
    pub(crate) map: PeriodicityMap,
    /// Hann of `noise_window_size` centred in an `fft_size` buffer.
    pub(crate) noise_window: Vec<f64>,
    spectrum: Vec<Complex64>,
    time: Vec<f64>,
}

/// `exp(v)` and per-bin periodicity of one frame.
#[derive(Debug, Clone)]
pub(crate) struct FrameFilters {
    pub(crate) magnitude: Vec<f64>,
    pub(crate) periodicity: Vec<f64>,
}

impl Renderer {
    pub(crate) fn new(config: &VocoderConfig) -> Result<Self> {
        config.validate()?;
        let n = config.fft_size;
        let w = hann_window(config.noise_window_size)?;
        let offset = (n - config.noise_window_size) / 2;
        let mut noise_window = vec![0.0; n];
        noise_window[offset..offset + w.len()].copy_from_slice(&w);
        let plan = RealFft::new(n);
        Ok(Renderer {
            config: config.clone(),
            spectrum: plan.make_spectrum(),
            time: vec![0.0; n],
            plan,
            map: PeriodicityMap::new(config),
            noise_window,
        })
    }

    pub(crate) fn filters(&self, frame: &FeatureFrame) -> FrameFilters {
        FrameFilters {
            magnitude: frame.v.iter().map(|v| v.exp()).collect(),
            periodicity: self.map.apply(&frame.p),
        }
    }

    /// Impulse response of the periodic filter with every bin negated at odd
    /// `k`, which centres the zero-phase response at sample `N / 2`.
    pub(crate) fn impulse_response(&mut self, filters: &FrameFilters, out: &mut [f64]) {
        for (k, ((s, m), p)) in self
            .spectrum
            .iter_mut()
            .zip(&filters.magnitude)
            .zip(&filters.periodicity)
            .enumerate()
        {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *s = Complex64::new(sign * m * p, 0.0);
        }
        self.plan.inverse(&self.spectrum, out);
    }

    /// Adds the periodic signal of one frame into `out[..periodic_buffer_len]`.
    pub(crate) fn add_periodic(
        &mut self,
        filters: &FrameFilters,
        f0: f64,
        impulses: &[usize],
        out: &mut [f64],
    ) {
        if impulses.is_empty() || filters.periodicity.iter().all(|&p| p == 0.0) {
            return;
        }
        let mut h = std::mem::take(&mut self.time);
        self.impulse_response(filters, &mut h);
        let scale = 1.0 / f0.sqrt();
        for &t in impulses {
            for (o, x) in out[t..t + h.len()].iter_mut().zip(&h) {
                *o += scale * x;
            }
        }
        self.time = h;
    }

    /// Adds the windowed, filtered noise of one frame into `out[..fft_size]`.
    pub(crate) fn add_aperiodic(&mut self, filters: &FrameFilters, noise: &[f64], out: &mut [f64]) {
        if filters.periodicity.iter().all(|&p| p == 1.0) {
            return;
        }
        self.plan.forward(noise, &mut self.spectrum);
        for ((s, m), p) in self
            .spectrum
            .iter_mut()
            .zip(&filters.magnitude)
            .zip(&filters.periodicity)
        {
            *s *= m * (1.0 - p);
        }
        let mut y = std::mem::take(&mut self.time);
        self.plan.inverse(&self.spectrum, &mut y);
        for ((o, x), w) in out.iter_mut().zip(&y).zip(&self.noise_window) {
            *o += x * w;
        }
        self.time = y;
    }
}

fn check_frame(frame: &FeatureFrame, config: &VocoderConfig) -> Result<()> {
    let violations = validate_track(&FeatureTrack::new(vec![frame.clone()]), config);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(violations))
    }
}

/// Zero-phase periodic impulse response, centred at sample `fft_size / 2`.
pub fn periodic_impulse_response(
    p_bins: &[f64],
    v_bins: &[f64],
    config: &VocoderConfig,
) -> Result<Vec<f64>> {
    if p_bins.len() != config.spectrum_bins || v_bins.len() != config.spectrum_bins {
        return Err(Error::invalid(format!(
            "periodicity and filter must both have {} bins",
            config.spectrum_bins
        )));
    }
    let mut renderer = Renderer::new(config)?;
    let filters = FrameFilters {
        magnitude: v_bins.iter().map(|v| v.exp()).collect(),
        periodicity: p_bins.to_vec(),
    };
    let mut out = vec![0.0; config.fft_size];
    renderer.impulse_response(&filters, &mut out);
    Ok(out)
}

/// Renders one frame of the periodic path into a fresh
/// `periodic_buffer_len` buffer and advances the running phase.
pub fn render_periodic_frame(
    frame: &FeatureFrame,
    state: &mut SynthState,
    config: &VocoderConfig,
) -> Result<Vec<f64>> {
    check_frame(frame, config)?;
    let mut renderer = Renderer::new(config)?;
    let impulses = state.advance_phase(frame.f0, config.sample_rate_hz as f64);
    let mut out = vec![0.0; config.periodic_buffer_len];
    let filters = renderer.filters(frame);
    renderer.add_periodic(&filters, frame.f0, &impulses, &mut out);
    Ok(out)
}

/// Renders one frame of the aperiodic path into a fresh `fft_size` buffer
/// and advances the noise buffer.
pub fn render_aperiodic_frame(
    frame: &FeatureFrame,
    state: &mut SynthState,
    config: &VocoderConfig,
) -> Result<Vec<f64>> {
    check_frame(frame, config)?;
    let mut renderer = Renderer::new(config)?;
    state.advance_noise();
    let mut out = vec![0.0; config.fft_size];
    let filters = renderer.filters(frame);
    renderer.add_aperiodic(&filters, &state.noise_buffer, &mut out);
    Ok(out)
}

/// The two halves of a synthesized utterance, already latency-trimmed.
/// Their element-wise sum is exactly what [`synthesize`] returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub periodic: Vec<f64>,
    pub aperiodic: Vec<f64>,
}

/// Overlap-add accumulators before trimming, `frames * hop + fft_size` long.
pub(crate) struct Accumulators {
    pub(crate) periodic: Vec<f64>,
    pub(crate) aperiodic: Vec<f64>,
}

pub(crate) fn render_track(
    renderer: &mut Renderer,
    track: &FeatureTrack,
    seed: u64,
) -> Accumulators {
    let config = renderer.config.clone();
    let hop = config.frame_shift;
    let total = track.len() * hop + config.fft_size;
    let mut acc = Accumulators {
        periodic: vec![0.0; total],
        aperiodic: vec![0.0; total],
    };
    let mut state = SynthState::new(&config, seed);
    let sr = config.sample_rate_hz as f64;
    for (i, frame) in track.frames.iter().enumerate() {
        let filters = renderer.filters(frame);
        let impulses = state.advance_phase(frame.f0, sr);
        state.advance_noise();
        let at = i * hop;
        renderer.add_periodic(
            &filters,
            frame.f0,
            &impulses,
            &mut acc.periodic[at..at + config.periodic_buffer_len],
        );
        renderer.add_aperiodic(
            &filters,
            &state.noise_buffer,
            &mut acc.aperiodic[at..at + config.fft_size],
        );
    }
    acc
}

/// Latency between an accumulator index and the output sample it becomes.
pub(crate) fn latency(config: &VocoderConfig) -> usize {
    config.fft_size / 2
}

/// Synthesizes both paths separately.
pub fn synthesize_components(
    track: &FeatureTrack,
    config: &VocoderConfig,
    seed: u64,
) -> Result<Components> {
    let violations = validate_track(track, config);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let mut renderer = Renderer::new(config)?;
    let acc = render_track(&mut renderer, track, seed);
    let len = track.len() * config.frame_shift;
    let lat = latency(config);
    Ok(Components {
        periodic: acc.periodic[lat..lat + len].to_vec(),
        aperiodic: acc.aperiodic[lat..lat + len].to_vec(),
    })
}

/// Renders a feature track to `frames * frame_shift` samples of audio.
///
/// The output is a deterministic function of `(track, config, seed)`.
pub fn synthesize(track: &FeatureTrack, config: &VocoderConfig, seed: u64) -> Result<AudioBuffer> {
    let parts = synthesize_components(track, config, seed)?;
    let samples = parts
        .periodic
        .iter()
        .zip(&parts.aperiodic)
        .map(|(p, a)| p + a)
        .collect();
    Ok(AudioBuffer::new(samples, config.sample_rate_hz))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> VocoderConfig {
        VocoderConfig::default()
    }

    #[test]
    fn extrapolation_preserves_constants() {
        let c = cfg();
        assert_eq!(
            extrapolate_periodicity(&[0.0; 12], &c).unwrap(),
            vec![0.0; 257]
        );
        let ones = extrapolate_periodicity(&[1.0; 12], &c).unwrap();
        assert!(ones.iter().all(|&p| (p - 1.0).abs() < 1e-15));
        assert!(extrapolate_periodicity(&[1.5; 12], &c).is_err());
        assert!(extrapolate_periodicity(&[0.5; 11], &c).is_err());
    }

    #[test]
    fn extrapolation_of_ramp_matches_reference_interpolation() {
        let c = cfg();
        let ramp: Vec<f64> = (0..12).map(|j| j as f64 / 11.0).collect();
        let out = extrapolate_periodicity(&ramp, &c).unwrap();
        assert!(out.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.iter().all(|p| (0.0..=1.0).contains(p)));

        // Reference: band centres computed from scratch, then a plain
        // piecewise-linear lookup with clamped ends.
        let mel_top = 2595.0 * (1.0f64 + 12_000.0 / 700.0).log10();
        let centers: Vec<f64> = (0..12)
            .map(|j| {
                let mel = (j as f64 + 0.5) * mel_top / 12.0;
                700.0 * (10f64.powf(mel / 2595.0) - 1.0) * 512.0 / 24_000.0
            })
            .collect();
        for (k, got) in out.iter().enumerate() {
            let x = k as f64;
            let expect = if x <= centers[0] {
                ramp[0]
            } else if x >= centers[11] {
                ramp[11]
            } else {
                let j = (0..11)
                    .find(|&j| x >= centers[j] && x < centers[j + 1])
                    .unwrap();
                let t = (x - centers[j]) / (centers[j + 1] - centers[j]);
                ramp[j] + t * (ramp[j + 1] - ramp[j])
            };
            assert!((got - expect).abs() < 1e-12, "bin {k}");
        }
        assert_eq!(out[0], 0.0);
        assert_eq!(out[256], 1.0);
    }

    #[test]
    fn map_transpose_matches_dense_matrix() {
        let map = PeriodicityMap::new(&cfg());
        let m = map.matrix();
        let g: Vec<f64> = (0..257).map(|k| ((k * 37) % 19) as f64 - 9.0).collect();
        let got = map.apply_transpose(&g);
        for j in 0..12 {
            let expect: f64 = (0..257).map(|k| m[k][j] * g[k]).sum();
            assert!((got[j] - expect).abs() < 1e-9);
        }
        assert!(m
            .iter()
            .all(|row| (row.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn impulse_response_zero_periodicity() {
        let c = cfg();
        let h = periodic_impulse_response(&[0.0; 257], &[0.3; 257], &c).unwrap();
        assert!(h.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn impulse_response_flat_filter_is_centred_delta() {
        let c = cfg();
        let h = periodic_impulse_response(&[1.0; 257], &[0.0; 257], &c).unwrap();
        for (n, x) in h.iter().enumerate() {
            let expect = if n == 256 { 1.0 } else { 0.0 };
            assert!((x - expect).abs() < 1e-10, "n={n} got {x}");
        }
    }

    #[test]
    fn impulse_response_parseval() {
        let c = cfg();
        let v: Vec<f64> = (0..257)
            .map(|k| -((k as f64 - 60.0) / 40.0).powi(2))
            .collect();
        let p: Vec<f64> = (0..257).map(|k| 0.2 + 0.6 * (k as f64 / 256.0)).collect();
        let h = periodic_impulse_response(&p, &v, &c).unwrap();
        let energy: f64 = h.iter().map(|x| x * x).sum();
        // Full 512-bin magnitude spectrum: interior bins appear twice.
        let spectrum: f64 = (0..257)
            .map(|k| {
                let m = v[k].exp() * p[k];
                let mult = if k == 0 || k == 256 { 1.0 } else { 2.0 };
                mult * m * m
            })
            .sum::<f64>()
            / 512.0;
        assert!((energy - spectrum).abs() / spectrum < 1e-10);
        // zero phase plus a half-length shift: symmetric around 256
        for n in 1..256 {
            assert!((h[256 - n] - h[256 + n]).abs() < 1e-12);
        }
    }

    // Independent simulation of the phase accumulator.
    fn simulate_impulses(f0: f64, frames: usize) -> Vec<usize> {
        let inc = f0 / 24_000.0;
        let mut phase = 0.0f64;
        let mut out = Vec::new();
        for n in 0..frames * 128 {
            if phase < inc {
                out.push(n);
            }
            phase = (phase + inc).fract();
        }
        out
    }

    #[test]
    fn unvoiced_frame_renders_nothing() {
        let c = cfg();
        let mut state = SynthState::new(&c, 1);
        state.running_phase = 0.25;
        let buf =
            render_periodic_frame(&FeatureFrame::flat(&c, 0.0, 1.0, 0.0), &mut state, &c).unwrap();
        assert_eq!(buf.len(), 640);
        assert!(buf.iter().all(|&x| x == 0.0));
        assert_eq!(state.running_phase, 0.25);
    }

    #[test]
    fn one_impulse_per_frame_at_period_128() {
        let c = cfg();
        let mut state = SynthState::new(&c, 1);
        let frame = FeatureFrame::flat(&c, 187.5, 1.0, 0.0);
        let mut offsets = Vec::new();
        for _ in 0..6 {
            let buf = render_periodic_frame(&frame, &mut state, &c).unwrap();
            let peaks: Vec<usize> = (0..640)
                .filter(|&i| buf[i] > 0.5 / 187.5f64.sqrt())
                .collect();
            assert_eq!(peaks.len(), 1);
            offsets.push(peaks[0]);
            assert!((0.0..1.0).contains(&state.running_phase));
        }
        assert!(offsets.iter().all(|&o| o == offsets[0]));
        assert_eq!(offsets[0], 256);
        let sim = simulate_impulses(187.5, 6);
        assert_eq!(sim, vec![0, 128, 256, 384, 512, 640]);
    }

    #[test]
    fn low_pitch_impulse_count() {
        let c = cfg();
        let mut state = SynthState::new(&c, 1);
        let mut total = 0;
        for _ in 0..15 {
            let impulses = state.advance_phase(50.0, 24_000.0);
            assert!(impulses.len() <= 1);
            total += impulses.len();
        }
        assert_eq!(total, 4);
        assert_eq!(simulate_impulses(50.0, 15).len(), 4);
    }

    #[test]
    fn phase_accumulator_agrees_with_simulation() {
        let c = cfg();
        for f0 in [80.0, 123.4, 200.0, 333.0, 1000.0] {
            let mut state = SynthState::new(&c, 0);
            let mut got = Vec::new();
            for i in 0..40 {
                got.extend(
                    state
                        .advance_phase(f0, 24_000.0)
                        .into_iter()
                        .map(|j| i * 128 + j),
                );
            }
            assert_eq!(got, simulate_impulses(f0, 40), "f0={f0}");
        }
    }

    #[test]
    fn fully_periodic_frame_has_no_noise() {
        let c = cfg();
        let mut state = SynthState::new(&c, 9);
        let buf = render_aperiodic_frame(&FeatureFrame::flat(&c, 100.0, 1.0, 0.0), &mut state, &c)
            .unwrap();
        assert_eq!(buf.len(), 512);
        assert!(buf.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn aperiodic_frames_are_deterministic() {
        let c = cfg();
        let frame = FeatureFrame::flat(&c, 100.0, 0.3, -0.5);
        let run = || {
            let mut state = SynthState::new(&c, 42);
            (0..5)
                .map(|_| render_aperiodic_frame(&frame, &mut state, &c).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn flat_noise_path_reproduces_the_noise_stream() {
        // With v = 0 and p = 0 the filter is the identity, and the 50%
        // overlapped Hann windows sum to one, so the interior of the output
        // is the raw noise stream.
        let c = cfg();
        let frames = 200;
        let track: FeatureTrack = (0..frames)
            .map(|_| FeatureFrame::flat(&c, 0.0, 0.0, 0.0))
            .collect();
        let out = synthesize(&track, &c, 5).unwrap();

        let mut noise = NoiseSource::new(5);
        let scale = 1.0 / 24_000f64.sqrt();
        let stream: Vec<f64> = (0..frames * 128 + 512)
            .map(|_| noise.next_uniform() * scale)
            .collect();
        for n in 0..(frames - 2) * 128 {
            assert!((out.samples[n] - stream[n + 256]).abs() < 1e-12, "n={n}");
        }

        // RMS statistics: uniform noise has variance 1/3.
        let expect = (1.0 / 3.0f64).sqrt() * scale;
        let interior = &out.samples[..(frames - 2) * 128];
        let rms = (interior.iter().map(|x| x * x).sum::<f64>() / interior.len() as f64).sqrt();
        assert!(
            (rms - expect).abs() / expect < 0.05,
            "rms {rms} vs {expect}"
        );
    }

    #[test]
    fn uniform_noise_range_and_mean() {
        let mut n = NoiseSource::new(3);
        let xs: Vec<f64> = (0..100_000).map(|_| n.next_uniform()).collect();
        assert!(xs.iter().all(|x| (-1.0..1.0).contains(x) && *x != -1.0));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.01);
    }

    #[test]
    fn empty_track_gives_empty_audio() {
        let out = synthesize(&FeatureTrack::default(), &cfg(), 0).unwrap();
        assert!(out.is_empty());
        assert_eq!(out.sample_rate_hz, 24_000);
    }

    #[test]
    fn invalid_track_is_rejected() {
        let c = cfg();
        let mut track: FeatureTrack = (0..4)
            .map(|_| FeatureFrame::flat(&c, 100.0, 0.5, 0.0))
            .collect();
        track.frames[2].p[0] = -0.1;
        match synthesize(&track, &c, 0) {
            Err(Error::Validation(v)) => assert_eq!(v[0].frame, 2),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn silent_features_give_silence() {
        let c = cfg();
        let track: FeatureTrack = (0..50)
            .map(|_| FeatureFrame::flat(&c, 0.0, 0.0, -40.0))
            .collect();
        let out = synthesize(&track, &c, 1).unwrap();
        assert_eq!(out.len(), 50 * 128);
        assert!(out.rms() < 1e-6);
        // bound: |noise| < 1/sqrt(24000) and the filter gain is exp(-40)
        let bound = (-40.0f64).exp() / 24_000f64.sqrt();
        assert!(out.samples.iter().all(|x| x.abs() <= bound));
    }
}
