//! Windows, the amplified logarithm and log-magnitude STFTs.

use std::f64::consts::{E, PI};

use num_complex::Complex64;

use crate::config::VocoderConfig;
use crate::error::{Error, Result};
use crate::fft::RealFft;
use crate::track::AudioBuffer;

/// Periodic Hann window, `w[n] = 0.5 (1 - cos(2 pi n / size))`.
///
/// Copies shifted by `size / 2` sum to exactly one, which is what makes the
/// 50%-overlap noise synthesis reconstruct its input.
pub fn hann_window(size: usize) -> Result<Vec<f64>> {
    if size < 2 || !size.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "Hann window size must be even and >= 2, got {size}"
        )));
    }
    let half = size / 2;
    let first: Vec<f64> = (0..half)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / size as f64).cos()))
        .collect();
    // second half mirrors the first about 1/2
    let second: Vec<f64> = first.iter().map(|w| 1.0 - w).collect();
    Ok([first, second].concat())
}

/// `|z|` without the overflow guard of `hypot`.
#[inline]
pub(crate) fn magnitude(z: Complex64) -> f64 {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// Amplified logarithm with a linear segment near zero.
///
/// With `g = 10^(gain_db / 20)`: `ln(y g)` when `y g >= e`, otherwise
/// `y g / e`. Both branches meet at 1 with slope `g / e`, and zero maps to
/// zero.
pub fn amp_log(y: f64, gain_db: f64) -> Result<f64> {
    if y.is_nan() || y < 0.0 {
        return Err(Error::invalid(format!("amp_log needs y >= 0, got {y}")));
    }
    Ok(amp_log_with_gain(y, 10f64.powf(gain_db / 20.0)))
}

#[inline]
pub(crate) fn amp_log_with_gain(y: f64, gain: f64) -> f64 {
    let a = y * gain;
    if a >= E {
        a.ln()
    } else {
        a / E
    }
}

/// Derivative of [`amp_log`] with respect to `y`. It is continuous: at the
/// branch point both sides equal `gain / e`.
#[inline]
pub fn amp_log_derivative(y: f64, gain: f64) -> f64 {
    let a = y * gain;
    if a >= E {
        1.0 / y
    } else {
        gain / E
    }
}

/// Row-major `frames x bins` matrix of amp_log magnitudes at one FFT size.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub fft_size: usize,
    pub hop: usize,
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<f64>,
}

impl Spectrogram {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.data[t * self.bins + k]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// One spectrogram per loss FFT size, in config order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramSet {
    pub members: Vec<Spectrogram>,
}

/// Frame analysis shared by the loss and its gradient.
///
/// Frame `t` covers samples `[t hop, t hop + fft_size)`, windowed by a
/// periodic Hann of length `fft_size` and zero-padded past the end of the
/// signal. A signal of `len` samples has `ceil(len / hop)` frames.
#[derive(Debug, Clone)]
pub struct Stft {
    fft_size: usize,
    hop: usize,
    window: Vec<f64>,
    plan: RealFft,
}

impl Stft {
    pub fn new(fft_size: usize, hop: usize) -> Result<Self> {
        if !fft_size.is_power_of_two() || fft_size < 4 {
            return Err(Error::invalid(format!(
                "STFT size must be a power of two >= 4, got {fft_size}"
            )));
        }
        if hop == 0 {
            return Err(Error::invalid("STFT hop must be positive"));
        }
        Ok(Stft {
            fft_size,
            hop,
            window: hann_window(fft_size)?,
            plan: RealFft::new(fft_size),
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.hop)
    }

    /// Complex spectra of every frame, row-major `frames x bins`.
    pub fn analyze(&self, samples: &[f64]) -> Vec<Complex64> {
        let frames = self.frame_count(samples.len());
        let bins = self.bins();
        let mut out = vec![Complex64::new(0.0, 0.0); frames * bins];
        let mut frame = vec![0.0; self.fft_size];
        for (t, row) in out.chunks_exact_mut(bins).enumerate() {
            let start = t * self.hop;
            let end = (start + self.fft_size).min(samples.len());
            frame.fill(0.0);
            for (i, x) in samples[start..end].iter().enumerate() {
                frame[i] = x * self.window[i];
            }
            self.plan.forward(&frame, row);
        }
        out
    }

    /// Log-amplified magnitude spectrogram.
    pub fn log_magnitude(&self, samples: &[f64], gain: f64) -> Spectrogram {
        let spectra = self.analyze(samples);
        let data = spectra
            .iter()
            .map(|z| amp_log_with_gain(magnitude(*z), gain))
            .collect();
        Spectrogram {
            fft_size: self.fft_size,
            hop: self.hop,
            frames: self.frame_count(samples.len()),
            bins: self.bins(),
            data,
        }
    }

    /// Adjoint of [`Stft::analyze`].
    ///
    /// `cotangent[t * bins + k]` holds `dL/dRe X + i dL/dIm X` for frame `t`,
    /// bin `k`. Returns `dL/dx` for a signal of `len` samples.
    pub fn adjoint(&self, cotangent: &[Complex64], len: usize) -> Vec<f64> {
        let bins = self.bins();
        let n = self.fft_size as f64;
        let frames = self.frame_count(len);
        assert_eq!(cotangent.len(), frames * bins);

        let mut grad = vec![0.0; len];
        let mut scaled = self.plan.make_spectrum();
        let mut frame_grad = vec![0.0; self.fft_size];
        for (t, row) in cotangent.chunks_exact(bins).enumerate() {
            if row.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            // irfft computes (1/N)[Y0 + Y_{N/2}(-1)^n + 2 Re sum Y_k e^{i th}],
            // so rescale to land on Re sum_k Z_k e^{i th}.
            for (k, (s, z)) in scaled.iter_mut().zip(row).enumerate() {
                *s = if k == 0 || k == bins - 1 {
                    Complex64::new(z.re * n, 0.0)
                } else {
                    z * (n / 2.0)
                };
            }
            self.plan.inverse(&scaled, &mut frame_grad);
            let start = t * self.hop;
            let end = (start + self.fft_size).min(len);
            for (i, g) in grad[start..end].iter_mut().enumerate() {
                *g += frame_grad[i] * self.window[i];
            }
        }
        grad
    }
}

/// Log-amplified magnitude STFT of `audio` at one FFT size.
pub fn stft_log_mag(
    audio: &AudioBuffer,
    fft_size: usize,
    hop: usize,
    gain_db: f64,
) -> Result<Spectrogram> {
    let stft = Stft::new(fft_size, hop)?;
    Ok(stft.log_magnitude(&audio.samples, 10f64.powf(gain_db / 20.0)))
}

/// Spectrograms at every loss FFT size of `config`.
pub fn spectrogram_set(audio: &AudioBuffer, config: &VocoderConfig) -> Result<SpectrogramSet> {
    let members = config
        .loss_fft_sizes
        .iter()
        .map(|&n| stft_log_mag(audio, n, config.frame_shift, config.gain_db))
        .collect::<Result<_>>()?;
    Ok(SpectrogramSet { members })
}
