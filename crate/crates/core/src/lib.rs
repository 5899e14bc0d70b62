//! A differentiable source-filter vocoder.
//!
//! Frame-level features (F0, 12-band periodicity, a 257-bin log-magnitude
//! filter) are rendered to 24 kHz audio by mixing a filtered impulse train
//! with filtered noise ([`synth`]). The training losses live in [`loss`],
//! exact gradients of the spectral loss with respect to the features in
//! [`grad`], feature recovery by gradient descent in [`abs`], and FLOP
//! counting plus real-time-factor timing in [`perf`].
//!
//! ```
//! use ddsp_vocoder::{synthesize, FeatureFrame, FeatureTrack, VocoderConfig};
//!
//! let config = VocoderConfig::default();
//! let track: FeatureTrack = (0..100)
//!     .map(|_| FeatureFrame::flat(&config, 120.0, 0.8, -1.0))
//!     .collect();
//! let audio = synthesize(&track, &config, 7).unwrap();
//! assert_eq!(audio.len(), 100 * 128);
//! ```
//!
//! The guide in `book/` walks through each stage; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod abs;
pub mod config;
pub mod error;
pub mod fft;
pub mod grad;
pub mod io;
pub mod loss;
pub mod perf;
pub mod spectral;
pub mod synth;
pub mod track;

pub use abs::{adam_step, estimate_features, Estimate, OptimizerConfig};
pub use config::{CountingRules, VocoderConfig};
pub use error::{Error, Result};
pub use grad::{
    finite_diff_check, loss_and_grad, random_problem, smooth_random_track, GradCheckReport,
};
pub use loss::{
    band_split, generator_loss, lsgan_losses, mw_stft_loss, refmse_loss, BandPartition,
};
pub use perf::{bench_rtf, count_flops, FlopsReport, RtfStats};
pub use spectral::{amp_log, hann_window, spectrogram_set, stft_log_mag, SpectrogramSet};
pub use synth::{
    extrapolate_periodicity, periodic_impulse_response, render_aperiodic_frame,
    render_periodic_frame, synthesize, synthesize_components, SynthState,
};
pub use track::{
    validate_track, AudioBuffer, FeatureFrame, FeatureTrack, GradientTrack, Violation,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/synthesis.md")]
    pub struct Synthesis;
    #[doc = include_str!("../../../book/src/losses.md")]
    pub struct Losses;
    #[doc = include_str!("../../../book/src/gradients.md")]
    pub struct Gradients;
    #[doc = include_str!("../../../book/src/analysis.md")]
    pub struct Analysis;
    #[doc = include_str!("../../../book/src/complexity.md")]
    pub struct Complexity;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct CommandLine;
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
}
