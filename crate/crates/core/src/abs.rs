//! Analysis-by-synthesis: fit `p` and `v` to target audio for a given F0
//! track by running Adam on the multi-window STFT loss.

use crate::config::VocoderConfig;
use crate::error::{Error, Result};
use crate::grad::SpectralObjective;
use crate::track::{AudioBuffer, FeatureFrame, FeatureTrack};

/// Adam hyper-parameters. The defaults are the generator settings used for
/// joint training of the acoustic model and vocoder.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub grad_clip_norm: f64,
    pub max_iters: usize,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.99,
            weight_decay: 1e-6,
            grad_clip_norm: 1.0,
            max_iters: 2000,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::invalid("Adam betas must lie in (0, 1)"));
        }
        let positive = |x: f64| x > 0.0;
        if !positive(self.learning_rate) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !positive(self.grad_clip_norm) || !positive(self.epsilon) || self.weight_decay < 0.0 {
            return Err(Error::invalid(
                "clip norm and epsilon must be positive, weight decay non-negative",
            ));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update with decoupled weight decay.
///
/// The gradient is first rescaled so its global L2 norm does not exceed
/// `grad_clip_norm`. `step_index` counts from 1.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    moment1: &mut [f64],
    moment2: &mut [f64],
    step_index: u64,
    opt: &OptimizerConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || moment1.len() != n || moment2.len() != n {
        return Err(Error::invalid(format!(
            "adam_step: shape mismatch (params {n}, grads {}, m {}, v {})",
            grads.len(),
            moment1.len(),
            moment2.len()
        )));
    }
    if step_index == 0 {
        return Err(Error::invalid("adam_step: step_index starts at 1"));
    }
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    let clip = if norm > opt.grad_clip_norm {
        opt.grad_clip_norm / norm
    } else {
        1.0
    };
    let bias1 = 1.0 - opt.beta1.powi(step_index as i32);
    let bias2 = 1.0 - opt.beta2.powi(step_index as i32);
    for i in 0..n {
        let g = grads[i] * clip;
        moment1[i] = opt.beta1 * moment1[i] + (1.0 - opt.beta1) * g;
        moment2[i] = opt.beta2 * moment2[i] + (1.0 - opt.beta2) * g * g;
        let m_hat = moment1[i] / bias1;
        let v_hat = moment2[i] / bias2;
        params[i] -= opt.learning_rate * opt.weight_decay * params[i];
        params[i] -= opt.learning_rate * m_hat / (v_hat.sqrt() + opt.epsilon);
    }
    Ok(())
}

/// Adam moments plus step counter for a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub opt: OptimizerConfig,
    moment1: Vec<f64>,
    moment2: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(opt: OptimizerConfig, len: usize) -> Self {
        Adam {
            opt,
            moment1: vec![0.0; len],
            moment2: vec![0.0; len],
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        self.step += 1;
        adam_step(
            params,
            grads,
            &mut self.moment1,
            &mut self.moment2,
            self.step,
            &self.opt,
        )
    }
}

pub const INITIAL_PERIODICITY: f64 = 0.5;
pub const INITIAL_LOG_FILTER: f64 = -2.0;

#[derive(Debug, Clone)]
pub struct Estimate {
    /// Track with the lowest loss seen.
    pub track: FeatureTrack,
    /// Loss of every iterate, starting with the initialization.
    pub history: Vec<f64>,
    pub best_iteration: usize,
}

impl Estimate {
    pub fn best_loss(&self) -> f64 {
        self.history[self.best_iteration]
    }
}

fn flatten(track: &FeatureTrack, out: &mut Vec<f64>) {
    out.clear();
    for f in &track.frames {
        out.extend_from_slice(&f.p);
        out.extend_from_slice(&f.v);
    }
}

fn unflatten_clamped(params: &mut [f64], track: &mut FeatureTrack) {
    let mut chunks = params.iter_mut();
    for f in &mut track.frames {
        for p in f.p.iter_mut() {
            let x = chunks.next().unwrap();
            *x = x.clamp(0.0, 1.0);
            *p = *x;
        }
        for v in f.v.iter_mut() {
            *v = *chunks.next().unwrap();
        }
    }
}

/// Recovers `p` and `v` for every frame of `target`, holding F0 fixed.
///
/// Starts from `p = 0.5`, `v = -2`, takes `opt.max_iters` Adam steps and
/// projects `p` back onto `[0, 1]` after each one. The synthesis noise is
/// drawn from `seed`, so copy-synthesis with the same seed can reach zero
/// loss.
pub fn estimate_features(
    target: &AudioBuffer,
    f0_track: &[f64],
    config: &VocoderConfig,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<Estimate> {
    estimate_features_with(target, f0_track, config, opt, seed, |_, _| {})
}

/// As [`estimate_features`], calling `progress(iteration, loss)` after every
/// evaluation.
pub fn estimate_features_with(
    target: &AudioBuffer,
    f0_track: &[f64],
    config: &VocoderConfig,
    opt: &OptimizerConfig,
    seed: u64,
    mut progress: impl FnMut(usize, f64),
) -> Result<Estimate> {
    opt.validate()?;
    if target.sample_rate_hz != config.sample_rate_hz {
        return Err(Error::invalid(format!(
            "target sample rate {} does not match vocoder rate {}",
            target.sample_rate_hz, config.sample_rate_hz
        )));
    }
    let frames = config.frames_for_samples(target.len());
    if f0_track.len() != frames {
        return Err(Error::invalid(format!(
            "F0 track has {} frames, audio of {} samples needs {frames}",
            f0_track.len(),
            target.len()
        )));
    }
    let nyquist = config.sample_rate_hz as f64 / 2.0;
    if f0_track.iter().any(|f| !(0.0..nyquist).contains(f)) {
        return Err(Error::invalid("F0 values must lie in [0, sample_rate / 2)"));
    }

    let mut track: FeatureTrack = f0_track
        .iter()
        .map(|&f0| FeatureFrame::flat(config, f0, INITIAL_PERIODICITY, INITIAL_LOG_FILTER))
        .collect();
    let mut objective = SpectralObjective::new(config)?;
    let mut params = Vec::new();
    flatten(&track, &mut params);
    let mut adam = Adam::new(opt.clone(), params.len());
    let mut flat_grad = Vec::with_capacity(params.len());

    let mut history = Vec::with_capacity(opt.max_iters + 1);
    let mut best = track.clone();
    let mut best_iteration = 0;
    for iteration in 0..=opt.max_iters {
        let (loss, grads) = objective.loss_and_grad(&track, &target.samples, seed);
        progress(iteration, loss);
        history.push(loss);
        if loss < history[best_iteration] {
            best_iteration = iteration;
            best.clone_from(&track);
        }
        if iteration == opt.max_iters {
            break;
        }
        flat_grad.clear();
        for (dp, dv) in grads.d_p.iter().zip(&grads.d_v) {
            flat_grad.extend_from_slice(dp);
            flat_grad.extend_from_slice(dv);
        }
        adam.step(&mut params, &flat_grad)?;
        unflatten_clamped(&mut params, &mut track);
    }

    Ok(Estimate {
        track: best,
        history,
        best_iteration,
    })
}
