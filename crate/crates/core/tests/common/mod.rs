#![allow(dead_code)]

use ddsp_vocoder::{smooth_random_track, FeatureFrame, FeatureTrack, VocoderConfig};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_track(frames: usize, seed: u64) -> FeatureTrack {
    smooth_random_track(frames, &VocoderConfig::default(), seed)
}

/// One-second style target with a single formant at `formant_bin`.
pub fn formant_track(frames: usize, formant_bin: f64, f0: f64) -> FeatureTrack {
    let config = VocoderConfig::default();
    (0..frames)
        .map(|i| {
            let p = (0..config.periodicity_dims)
                .map(|j| 0.85 - 0.6 * j as f64 / 11.0)
                .collect();
            let v = (0..config.spectrum_bins)
                .map(|k| {
                    let x = k as f64;
                    -2.5 - 0.8 * x / 256.0 + 1.8 * (-((x - formant_bin) / 6.0).powi(2)).exp()
                })
                .collect();
            FeatureFrame::new(f0 + 10.0 * (i as f64 * 0.05).sin(), p, v)
        })
        .collect()
}
