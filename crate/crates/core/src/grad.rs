//! Analytic gradients of the multi-window STFT loss with respect to the
//! periodicity and filter features.
//!
//! The forward graph, per frame, is
//!
//! ```text
//! p12 --map--> p257 --+--> exp(v) p       --irfft, +-1 sign--> h --place at impulses--+
//!                     |                                                              +--> OLA --> y
//! v ----exp----> m ---+--> exp(v) (1-p) * rfft(noise) --irfft--> * hann -------------+
//! y --STFT--> |X| --amp_log--> A --L1 vs target--> loss
//! ```
//!
//! Impulse positions depend only on F0 and the noise only on the seed, so
//! with both held fixed the output is linear in the two filter magnitudes
//! and the gradient below is exact. F0 receives no gradient.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::config::VocoderConfig;
use crate::error::{Error, Result};
use crate::loss::{zero_pad, MultiWindowStftLoss};
use crate::spectral::{amp_log_derivative, amp_log_with_gain, magnitude};
use crate::synth::synthesize;
use crate::synth::{latency, render_track, Renderer, SynthState};
use crate::track::{validate_track, AudioBuffer, FeatureFrame, FeatureTrack, GradientTrack};

/// Reusable loss-and-gradient evaluator for one configuration.
#[derive(Debug, Clone)]
pub struct SpectralObjective {
    renderer: Renderer,
    loss: MultiWindowStftLoss,
    // last target (zero-padded) and its log-magnitude spectrograms
    reference: Option<(Vec<f64>, Vec<Vec<f64>>)>,
}

impl SpectralObjective {
    pub fn new(config: &VocoderConfig) -> Result<Self> {
        Ok(SpectralObjective {
            renderer: Renderer::new(config)?,
            loss: MultiWindowStftLoss::new(config)?,
            reference: None,
        })
    }

    pub fn config(&self) -> &VocoderConfig {
        &self.renderer.config
    }

    fn predict(&mut self, track: &FeatureTrack, seed: u64) -> Vec<f64> {
        let acc = render_track(&mut self.renderer, track, seed);
        let lat = latency(&self.renderer.config);
        let len = track.len() * self.renderer.config.frame_shift;
        (lat..lat + len)
            .map(|i| acc.periodic[i] + acc.aperiodic[i])
            .collect()
    }

    /// Loss only. Does not validate the track, so finite differences may
    /// step slightly outside `[0, 1]`.
    pub fn loss(&mut self, track: &FeatureTrack, target: &[f64], seed: u64) -> f64 {
        let pred = self.predict(track, seed);
        self.loss.eval(target, &pred)
    }

    /// Per-cell loss terms, see [`MultiWindowStftLoss::terms`].
    pub fn loss_terms(&mut self, track: &FeatureTrack, target: &[f64], seed: u64) -> Vec<f64> {
        let pred = self.predict(track, seed);
        self.loss.terms(target, &pred)
    }

    /// Loss and gradient without validation.
    pub fn loss_and_grad(
        &mut self,
        track: &FeatureTrack,
        target: &[f64],
        seed: u64,
    ) -> (f64, GradientTrack) {
        let config = self.renderer.config.clone();
        let pred = self.predict(track, seed);
        let (loss, d_pred) = self.spectral_backward(target, &pred);

        let hop = config.frame_shift;
        let lat = latency(&config);
        let mut d_acc = vec![0.0; track.len() * hop + config.fft_size];
        d_acc[lat..lat + pred.len()].copy_from_slice(&d_pred[..pred.len()]);

        let grads = self.synth_backward(track, seed, &d_acc);
        (loss, grads)
    }

    /// Loss value and `dL/d pred` (length = padded length).
    fn cache_reference(&mut self, target: &[f64]) {
        let stale = !matches!(&self.reference, Some((cached, _)) if cached[..] == *target);
        if stale {
            let gain = self.loss.gain();
            let spectra = self
                .loss
                .stfts()
                .iter()
                .map(|stft| stft.log_magnitude(target, gain).data)
                .collect();
            self.reference = Some((target.to_vec(), spectra));
        }
    }

    fn spectral_backward(&mut self, target: &[f64], pred: &[f64]) -> (f64, Vec<f64>) {
        let len = target.len().max(pred.len());
        if len == 0 {
            return (0.0, Vec::new());
        }
        let target = zero_pad(target, len);
        let pred = zero_pad(pred, len);
        let gain = self.loss.gain();
        self.cache_reference(&target);
        let references = &self.reference.as_ref().expect("reference cached above").1;

        let mut total = 0.0;
        let mut d_pred = vec![0.0; len];
        for ((stft, &weight), reference) in self
            .loss
            .stfts()
            .iter()
            .zip(self.loss.weights())
            .zip(references)
        {
            let spectra = stft.analyze(&pred);
            let scale = weight / spectra.len() as f64;

            let mut l1 = 0.0;
            let cotangent: Vec<Complex64> = spectra
                .iter()
                .zip(reference)
                .map(|(x, &r)| {
                    let mag = magnitude(*x);
                    let diff = amp_log_with_gain(mag, gain) - r;
                    l1 += diff.abs();
                    if diff == 0.0 || mag == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    // d|X|/d(Re X, Im X) = X / |X|
                    let g = scale * diff.signum() * amp_log_derivative(mag, gain) / mag;
                    x * g
                })
                .collect();
            total += scale * l1;

            for (d, g) in d_pred.iter_mut().zip(stft.adjoint(&cotangent, len)) {
                *d += g;
            }
        }
        (total, d_pred)
    }

    /// Pulls `dL/d accumulator` back to the per-frame features.
    fn synth_backward(&mut self, track: &FeatureTrack, seed: u64, d_acc: &[f64]) -> GradientTrack {
        let config = self.renderer.config.clone();
        let n = config.fft_size;
        let bins = config.spectrum_bins;
        let hop = config.frame_shift;
        let sr = config.sample_rate_hz as f64;
        let plan = self.renderer.plan.clone();

        let mut grads = GradientTrack::zeros(track.len(), &config);
        let mut state = SynthState::new(&config, seed);
        let mut frame_buf = vec![0.0; n];
        let mut g_spec = plan.make_spectrum();
        let mut noise_spec = plan.make_spectrum();
        let mut d_p_bins = vec![0.0; bins];

        // c_k / N with c_k = 1 at DC and Nyquist, 2 elsewhere
        let fold = |k: usize| if k == 0 || k == bins - 1 { 1.0 } else { 2.0 } / n as f64;

        for (i, frame) in track.frames.iter().enumerate() {
            let filters = self.renderer.filters(frame);
            let impulses = state.advance_phase(frame.f0, sr);
            state.advance_noise();
            let at = i * hop;
            let d_v = &mut grads.d_v[i];
            d_p_bins.fill(0.0);

            if !impulses.is_empty() {
                let scale = 1.0 / frame.f0.sqrt();
                frame_buf.fill(0.0);
                for &t in &impulses {
                    for (b, d) in frame_buf.iter_mut().zip(&d_acc[at + t..at + t + n]) {
                        *b += scale * d;
                    }
                }
                plan.forward(&frame_buf, &mut g_spec);
                for k in 0..bins {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let d_mag = sign * fold(k) * g_spec[k].re;
                    let m = filters.magnitude[k];
                    let p = filters.periodicity[k];
                    d_v[k] += d_mag * m * p;
                    d_p_bins[k] += d_mag * m;
                }
            }

            for ((b, d), w) in frame_buf
                .iter_mut()
                .zip(&d_acc[at..at + n])
                .zip(&self.renderer.noise_window)
            {
                *b = d * w;
            }
            plan.forward(&frame_buf, &mut g_spec);
            plan.forward(&state.noise_buffer, &mut noise_spec);
            for k in 0..bins {
                let d_filter = fold(k) * (noise_spec[k] * g_spec[k].conj()).re;
                let m = filters.magnitude[k];
                let p = filters.periodicity[k];
                d_v[k] += d_filter * m * (1.0 - p);
                d_p_bins[k] -= d_filter * m;
            }

            grads.d_p[i] = self.renderer.map.apply_transpose(&d_p_bins);
        }
        grads
    }
}

/// Loss between `target` and the synthesis of `track`, and its gradient with
/// respect to every frame's `p` and `v`.
pub fn loss_and_grad(
    track: &FeatureTrack,
    target: &AudioBuffer,
    config: &VocoderConfig,
    seed: u64,
) -> Result<(f64, GradientTrack)> {
    if target.sample_rate_hz != config.sample_rate_hz {
        return Err(Error::invalid(format!(
            "target sample rate {} does not match vocoder rate {}",
            target.sample_rate_hz, config.sample_rate_hz
        )));
    }
    let violations = validate_track(track, config);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let mut objective = SpectralObjective::new(config)?;
    Ok(objective.loss_and_grad(track, &target.samples, seed))
}

/// Which feature a finite-difference probe perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    P(usize),
    V(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub frame: usize,
    pub coordinate: Coordinate,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub probes: Vec<Probe>,
}

fn coordinate_mut(track: &mut FeatureTrack, frame: usize, coordinate: Coordinate) -> &mut f64 {
    match coordinate {
        Coordinate::P(j) => &mut track.frames[frame].p[j],
        Coordinate::V(k) => &mut track.frames[frame].v[k],
    }
}

/// Compares analytic gradients with central differences at `trials` random
/// `(frame, coordinate)` pairs, half drawn from `p` and half from `v`.
///
/// The two perturbed losses are differenced cell by cell before summing;
/// spectrogram cells the probe cannot reach contribute exactly zero.
///
/// The relative error of one probe is `|a - n| / (|a| + |n| + 1e-12)`.
pub fn finite_diff_check(
    track: &FeatureTrack,
    target: &AudioBuffer,
    config: &VocoderConfig,
    seed: u64,
    eps: f64,
    trials: usize,
) -> Result<GradCheckReport> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::invalid(format!(
            "eps must lie in (0, 1e-2], got {eps}"
        )));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if track.is_empty() {
        return Err(Error::invalid("gradient check needs at least one frame"));
    }
    let (_, grads) = loss_and_grad(track, target, config, seed)?;
    let mut objective = SpectralObjective::new(config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut pick = |n: usize| (rng.next_u64() % n as u64) as usize;

    let mut probes = Vec::with_capacity(trials);
    let mut work = track.clone();
    for trial in 0..trials {
        let frame = pick(track.len());
        let coordinate = if trial % 2 == 0 {
            Coordinate::P(pick(config.periodicity_dims))
        } else {
            Coordinate::V(pick(config.spectrum_bins))
        };
        let analytic = match coordinate {
            Coordinate::P(j) => grads.d_p[frame][j],
            Coordinate::V(k) => grads.d_v[frame][k],
        };
        let original = *coordinate_mut(&mut work, frame, coordinate);
        *coordinate_mut(&mut work, frame, coordinate) = original + eps;
        let plus = objective.loss_terms(&work, &target.samples, seed);
        *coordinate_mut(&mut work, frame, coordinate) = original - eps;
        let minus = objective.loss_terms(&work, &target.samples, seed);
        *coordinate_mut(&mut work, frame, coordinate) = original;
        let delta: f64 = plus.iter().zip(&minus).map(|(a, b)| a - b).sum();
        let numeric = delta / (2.0 * eps);
        let relative_error = (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-12);
        probes.push(Probe {
            frame,
            coordinate,
            analytic,
            numeric,
            relative_error,
        });
    }
    let max_relative_error = probes.iter().map(|p| p.relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_relative_error,
        probes,
    })
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
}

/// Smooth random features with `p` strictly inside `(0, 1)`, `|v| < 5` and a
/// voiced, slowly drifting F0.
pub fn smooth_random_track(frames: usize, config: &VocoderConfig, seed: u64) -> FeatureTrack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0 = uniform(&mut rng, 90.0, 250.0);
    let tilt = uniform(&mut rng, 0.5, 2.0);
    let formant = uniform(&mut rng, 20.0, 120.0);
    let top = config.spectrum_bins.saturating_sub(1).max(1) as f64;
    (0..frames)
        .map(|i| {
            let drift = (i as f64 * 0.3).sin();
            let p = (0..config.periodicity_dims)
                .map(|_| uniform(&mut rng, 0.15, 0.85))
                .collect();
            let v = (0..config.spectrum_bins)
                .map(|k| {
                    let x = k as f64;
                    -1.0 - tilt * x / top
                        + 1.5 * (-((x - formant - 5.0 * drift) / 12.0).powi(2)).exp()
                        + 0.2 * uniform(&mut rng, -1.0, 1.0)
                })
                .collect();
            FeatureFrame::new(f0 * (1.0 + 0.05 * drift), p, v)
        })
        .collect()
}

/// A gradient-check problem: a smooth random track and a target rendered
/// from an independent track whose filter sits `e^2` louder, so the two
/// log spectrograms stay apart and the L1 loss is differentiable around
/// the track.
pub fn random_problem(
    frames: usize,
    config: &VocoderConfig,
    seed: u64,
) -> Result<(FeatureTrack, AudioBuffer)> {
    let track = smooth_random_track(frames, config, seed);
    let mut source = smooth_random_track(frames, config, seed.wrapping_add(0x5eed));
    for frame in &mut source.frames {
        frame.v.iter_mut().for_each(|v| *v += 2.0);
    }
    let target = synthesize(&source, config, seed.wrapping_add(1))?;
    Ok((track, target))
}
