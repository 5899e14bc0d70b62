//! Training objectives: reference MSE, the multi-window STFT loss, the
//! frequency-band partition used by the spectrogram discriminators, and the
//! least-squares adversarial loss arithmetic.

use std::ops::Range;

use crate::config::VocoderConfig;
use crate::error::{Error, Result};
use crate::spectral::Stft;
use crate::track::AudioBuffer;

/// Weighted squared error on F0 and band periodicity.
///
/// `lambda_f0 * mean_t (f0 - f0')^2 + (lambda_p / d) * mean_t sum_j (p - p')^2`
/// with `d` the periodicity dimension.
pub fn refmse_loss(
    f0_pred: &[f64],
    f0_ref: &[f64],
    p_pred: &[Vec<f64>],
    p_ref: &[Vec<f64>],
    config: &VocoderConfig,
) -> Result<f64> {
    if f0_pred.len() != f0_ref.len() || p_pred.len() != p_ref.len() {
        return Err(Error::invalid("refmse_loss: frame counts differ"));
    }
    if f0_pred.len() != p_pred.len() {
        return Err(Error::invalid(
            "refmse_loss: F0 and periodicity frame counts differ",
        ));
    }
    if p_pred
        .iter()
        .chain(p_ref)
        .any(|p| p.len() != config.periodicity_dims)
    {
        return Err(Error::invalid(format!(
            "refmse_loss: periodicity rows must have {} entries",
            config.periodicity_dims
        )));
    }
    let frames = f0_pred.len();
    if frames == 0 {
        return Ok(0.0);
    }
    let f0_term = f0_pred
        .iter()
        .zip(f0_ref)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / frames as f64;
    let p_term = p_pred
        .iter()
        .zip(p_ref)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum::<f64>()
        / frames as f64;
    Ok(config.lambda_f0 * f0_term + config.lambda_p / config.periodicity_dims as f64 * p_term)
}

/// Multi-window STFT loss with cached analysis plans.
///
/// For each loss FFT size `c`: `lambda_c * |X_c - X'_c|_1 / N_c`, where `X`
/// are amp_log magnitudes and `N_c` is the element count of the magnitude
/// matrix. Signals of different length are compared after zero-padding the
/// shorter one.
#[derive(Debug, Clone)]
pub struct MultiWindowStftLoss {
    stfts: Vec<Stft>,
    weights: Vec<f64>,
    gain: f64,
}

impl MultiWindowStftLoss {
    pub fn new(config: &VocoderConfig) -> Result<Self> {
        config.validate()?;
        let stfts = config
            .loss_fft_sizes
            .iter()
            .map(|&n| Stft::new(n, config.frame_shift))
            .collect::<Result<_>>()?;
        Ok(MultiWindowStftLoss {
            stfts,
            weights: config.loss_weights_stft.clone(),
            gain: config.gain(),
        })
    }

    pub(crate) fn stfts(&self) -> &[Stft] {
        &self.stfts
    }

    pub(crate) fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn gain(&self) -> f64 {
        self.gain
    }

    pub fn eval(&self, reference: &[f64], predicted: &[f64]) -> f64 {
        let len = reference.len().max(predicted.len());
        if len == 0 {
            return 0.0;
        }
        let reference = zero_pad(reference, len);
        let predicted = zero_pad(predicted, len);
        self.stfts
            .iter()
            .zip(&self.weights)
            .map(|(stft, w)| {
                let a = stft.log_magnitude(&reference, self.gain);
                let b = stft.log_magnitude(&predicted, self.gain);
                let l1: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
                w * l1 / a.data.len() as f64
            })
            .sum()
    }
}

impl MultiWindowStftLoss {
    /// The individual weighted terms `lambda_c |X - X'| / N_c` of every
    /// spectrogram cell, FFT sizes concatenated. Their sum is [`Self::eval`].
    pub fn terms(&self, reference: &[f64], predicted: &[f64]) -> Vec<f64> {
        let len = reference.len().max(predicted.len());
        let reference = zero_pad(reference, len);
        let predicted = zero_pad(predicted, len);
        let mut out = Vec::new();
        for (stft, w) in self.stfts.iter().zip(&self.weights) {
            let a = stft.log_magnitude(&reference, self.gain);
            let b = stft.log_magnitude(&predicted, self.gain);
            let scale = w / a.data.len() as f64;
            out.extend(
                a.data
                    .iter()
                    .zip(&b.data)
                    .map(|(x, y)| scale * (x - y).abs()),
            );
        }
        out
    }
}

pub(crate) fn zero_pad(x: &[f64], len: usize) -> std::borrow::Cow<'_, [f64]> {
    if x.len() == len {
        std::borrow::Cow::Borrowed(x)
    } else {
        let mut v = x.to_vec();
        v.resize(len, 0.0);
        std::borrow::Cow::Owned(v)
    }
}

pub fn mw_stft_loss(
    reference: &AudioBuffer,
    predicted: &AudioBuffer,
    config: &VocoderConfig,
) -> Result<f64> {
    if reference.sample_rate_hz != predicted.sample_rate_hz {
        return Err(Error::invalid("mw_stft_loss: sample rates differ"));
    }
    Ok(MultiWindowStftLoss::new(config)?.eval(&reference.samples, &predicted.samples))
}

/// Convenience used in tests and docs: mean amp_log magnitude per FFT size,
/// weighted and summed. Equals the loss against digital silence.
pub fn weighted_mean_log_magnitude(audio: &AudioBuffer, config: &VocoderConfig) -> Result<f64> {
    let loss = MultiWindowStftLoss::new(config)?;
    Ok(loss
        .stfts
        .iter()
        .zip(&loss.weights)
        .map(|(stft, w)| {
            let s = stft.log_magnitude(&audio.samples, loss.gain);
            w * s.data.iter().sum::<f64>() / s.data.len().max(1) as f64
        })
        .sum())
}

/// Overlapping frequency bands over the 257-bin spectrogram.
///
/// The bins are cut into eight 32-bin cores, `[32k, 32k + 32)`, and each
/// band reaches 8 bins into the cores of its neighbours:
/// `[max(0, 32k - 8), min(257, 32k + 40))`. Interior bands are 48 bins wide,
/// the first is 40 wide and the last 41 because it also takes the Nyquist
/// bin. Two neighbouring bands therefore share 16 bins, 8 from each side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandPartition {
    pub ranges: Vec<Range<usize>>,
}

impl BandPartition {
    pub const BANDS: usize = 8;
    const STRIDE: usize = 32;
    const OVERLAP: usize = 8;

    pub fn new(bins: usize) -> Self {
        let ranges = (0..Self::BANDS)
            .map(|k| {
                let start = (Self::STRIDE * k).saturating_sub(Self::OVERLAP);
                let end = if k + 1 == Self::BANDS {
                    bins
                } else {
                    (Self::STRIDE * (k + 1) + Self::OVERLAP).min(bins)
                };
                start..end
            })
            .collect();
        BandPartition { ranges }
    }

    pub fn widths(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    /// The 32-bin core of band `k`, the part no lower or higher core covers.
    pub fn core(&self, k: usize) -> Range<usize> {
        let end = if k + 1 == Self::BANDS {
            self.ranges[k].end
        } else {
            Self::STRIDE * (k + 1)
        };
        Self::STRIDE * k..end
    }

    /// Bins of band `k` that lie inside the core of band `j`.
    pub fn reach(&self, k: usize, j: usize) -> Range<usize> {
        let (band, core) = (&self.ranges[k], self.core(j));
        band.start.max(core.start)..band.end.min(core.end).max(band.start.max(core.start))
    }
}

impl Default for BandPartition {
    fn default() -> Self {
        BandPartition::new(257)
    }
}

/// Splits one 257-bin spectrogram column into the eight discriminator bands.
pub fn band_split(spectrum: &[f64]) -> Result<Vec<Vec<f64>>> {
    if spectrum.len() != 257 {
        return Err(Error::invalid(format!(
            "band_split expects 257 bins, got {}",
            spectrum.len()
        )));
    }
    Ok(BandPartition::default()
        .ranges
        .iter()
        .map(|r| spectrum[r.clone()].to_vec())
        .collect())
}

/// Least-squares GAN losses for one discriminator's patch scores.
///
/// Returns `(d_loss, g_loss)` with
/// `d_loss = mean (s_real - 1)^2 + mean s_fake^2` and
/// `g_loss = lambda_adv * mean (s_fake - 1)^2`.
pub fn lsgan_losses(
    scores_real: &[f64],
    scores_fake: &[f64],
    config: &VocoderConfig,
) -> Result<(f64, f64)> {
    if scores_real.is_empty() || scores_fake.is_empty() {
        return Err(Error::invalid(
            "lsgan_losses: score arrays must be non-empty",
        ));
    }
    let mean = |xs: &[f64], f: &dyn Fn(f64) -> f64| {
        xs.iter().map(|&x| f(x)).sum::<f64>() / xs.len() as f64
    };
    let d_loss = mean(scores_real, &|s| (s - 1.0).powi(2)) + mean(scores_fake, &|s| s * s);
    let g_loss = config.lambda_adv * mean(scores_fake, &|s| (s - 1.0).powi(2));
    Ok((d_loss, g_loss))
}

/// Generator objective: plain sum of the three terms. Pass `adv = 0` for the
/// pre-training phase that uses only the reference and spectral losses.
pub fn generator_loss(refmse: f64, mw_stft: f64, adv: f64) -> f64 {
    refmse + mw_stft + adv
}
