//! Vocoder constants and FLOP-counting conventions.

use crate::error::{Error, Result};

/// Fixed parameters of the vocoder, its losses and the complexity report.
///
/// `Default` gives the reference configuration: 24 kHz audio, a 128-sample
/// hop, 512-point transforms, losses at 512/1024/2048 points.
#[derive(Debug, Clone, PartialEq)]
pub struct VocoderConfig {
    pub sample_rate_hz: u32,
    pub frame_shift: usize,
    pub fft_size: usize,
    pub spectrum_bins: usize,
    pub noise_window_size: usize,
    pub periodic_buffer_len: usize,
    pub loss_fft_sizes: Vec<usize>,
    pub loss_weights_stft: Vec<f64>,
    pub gain_db: f64,
    pub lambda_f0: f64,
    pub lambda_p: f64,
    pub lambda_adv: f64,
    pub periodicity_dims: usize,
    pub counting: CountingRules,
}

/// Conventions used by [`crate::perf::count_flops`].
#[derive(Debug, Clone, PartialEq)]
pub struct CountingRules {
    /// FLOPs per `N log2 N` for an N-point real FFT or inverse FFT.
    pub fft_coefficient: f64,
    /// FLOPs for one complex-by-complex bin multiply.
    pub complex_mul: f64,
    /// FLOPs charged for one `exp` evaluation.
    pub exp_eval: f64,
    /// FLOPs per multiply-accumulate.
    pub mac: f64,
    /// Pitch assumed when counting impulse placements per frame.
    pub nominal_f0_hz: f64,
}

impl Default for CountingRules {
    fn default() -> Self {
        CountingRules {
            fft_coefficient: 5.0,
            complex_mul: 6.0,
            exp_eval: 1.0,
            mac: 2.0,
            nominal_f0_hz: 187.5,
        }
    }
}

impl Default for VocoderConfig {
    fn default() -> Self {
        VocoderConfig {
            sample_rate_hz: 24_000,
            frame_shift: 128,
            fft_size: 512,
            spectrum_bins: 257,
            noise_window_size: 256,
            periodic_buffer_len: 640,
            loss_fft_sizes: vec![512, 1024, 2048],
            loss_weights_stft: vec![25.7, 51.3, 102.5],
            gain_db: 72.0,
            lambda_f0: 50.0,
            lambda_p: 30.0,
            lambda_adv: 50.0,
            periodicity_dims: 12,
            counting: CountingRules::default(),
        }
    }
}

impl VocoderConfig {
    /// Linear amplitude gain applied inside `amp_log`.
    pub fn gain(&self) -> f64 {
        10f64.powf(self.gain_db / 20.0)
    }

    pub fn frames_per_second(&self) -> f64 {
        self.sample_rate_hz as f64 / self.frame_shift as f64
    }

    /// Number of feature frames covering `samples` audio samples.
    pub fn frames_for_samples(&self, samples: usize) -> usize {
        samples.div_ceil(self.frame_shift)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(msg));
        if !self.fft_size.is_power_of_two() || self.fft_size < 4 {
            return bad("fft_size must be a power of two >= 4");
        }
        if self.spectrum_bins != self.fft_size / 2 + 1 {
            return bad("spectrum_bins must equal fft_size/2 + 1");
        }
        if self.frame_shift == 0 || !self.fft_size.is_multiple_of(self.frame_shift) {
            return bad("frame_shift must divide fft_size");
        }
        if self.periodic_buffer_len != self.fft_size + self.frame_shift {
            return bad("periodic_buffer_len must equal fft_size + frame_shift");
        }
        if self.noise_window_size < 2
            || !self.noise_window_size.is_multiple_of(2)
            || self.noise_window_size > self.fft_size
        {
            return bad("noise_window_size must be even and no larger than fft_size");
        }
        if self.noise_window_size != 2 * self.frame_shift {
            return bad("noise_window_size must be twice the frame shift for overlap-add");
        }
        if self.loss_fft_sizes.is_empty()
            || self.loss_fft_sizes.len() != self.loss_weights_stft.len()
        {
            return bad("loss_fft_sizes and loss_weights_stft must have equal, non-zero length");
        }
        if self
            .loss_fft_sizes
            .iter()
            .any(|n| !n.is_power_of_two() || *n < 4)
        {
            return bad("loss FFT sizes must be powers of two");
        }
        let weights = self.loss_weights_stft.iter().chain([
            &self.lambda_f0,
            &self.lambda_p,
            &self.lambda_adv,
        ]);
        if weights
            .into_iter()
            .any(|w| w.is_nan() || *w <= 0.0 || w.is_infinite())
        {
            return bad("all loss weights must be strictly positive");
        }
        if self.periodicity_dims < 2 {
            return bad("periodicity_dims must be at least 2");
        }
        if self.sample_rate_hz == 0 {
            return bad("sample_rate_hz must be positive");
        }
        Ok(())
    }
}
