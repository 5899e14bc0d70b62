//! `ddspvoc`: synthesize, analyze, gradient-check and benchmark the vocoder.
//!
//! Exit codes: 0 success, 1 failed check, 2 I/O or parse error, 3 validation
//! or shape error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddsp_vocoder::io::{read_features, read_wav, write_features, write_wav, FeatureHeader};
use ddsp_vocoder::{
    abs::estimate_features_with, bench_rtf, count_flops, finite_diff_check, random_problem,
    smooth_random_track, synthesize, validate_track, Error, OptimizerConfig, VocoderConfig,
};

const GRADCHECK_EPS: f64 = 1e-5;
const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "ddspvoc", version, about = "Source-filter DSP vocoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a feature file to a 16-bit mono WAV.
    Synth {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recover periodicity and filter features from audio and an F0 track.
    Analyze {
        #[arg(long)]
        audio: PathBuf,
        /// Text file with one F0 value in Hz per frame.
        #[arg(long)]
        f0: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Loss history output, one `iteration loss` pair per line.
        /// Defaults to the feature path with `.loss.txt` appended.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 8)]
        frames: usize,
        #[arg(long, default_value_t = 64)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Measure the real-time factor and print the FLOP count.
    Bench {
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the per-stage FLOP count.
    Flops,
}

#[derive(Debug)]
enum Failure {
    Check(String),
    Io(String),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Io(_) => 2,
            Failure::Validation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Check(m) | Failure::Io(m) | Failure::Validation(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(violations) => {
                let mut msg = format!("{} invalid value(s):", violations.len());
                for v in &violations {
                    let _ = write!(msg, "\n  {v}");
                }
                Failure::Validation(msg)
            }
            Error::InvalidArgument(m) => Failure::Validation(m),
            other => Failure::Io(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ddspvoc: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let config = VocoderConfig::default();
    match command {
        Command::Synth {
            features,
            out,
            seed,
        } => cmd_synth(&config, &features, &out, seed),
        Command::Analyze {
            audio,
            f0,
            out,
            history,
            iters,
            lr,
            seed,
        } => {
            let history = history.unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".loss.txt");
                p.into()
            });
            let mut opt = OptimizerConfig {
                max_iters: iters,
                ..OptimizerConfig::default()
            };
            if let Some(lr) = lr {
                opt.learning_rate = lr;
            }
            cmd_analyze(&config, &audio, &f0, &out, &history, &opt, seed)
        }
        Command::Gradcheck {
            frames,
            trials,
            seed,
        } => cmd_gradcheck(&config, frames, trials, seed),
        Command::Bench {
            seconds,
            repeats,
            seed,
        } => cmd_bench(&config, seconds, repeats, seed),
        Command::Flops => {
            print!("{}", count_flops(&config));
            Ok(())
        }
    }
}

fn check_header(header: &FeatureHeader, config: &VocoderConfig) -> Result<(), Failure> {
    let expected = [
        (
            "periodicity dims",
            header.periodicity_dims as usize,
            config.periodicity_dims,
        ),
        (
            "filter dims",
            header.filter_dims as usize,
            config.spectrum_bins,
        ),
        (
            "sample rate",
            header.sample_rate_hz as usize,
            config.sample_rate_hz as usize,
        ),
        (
            "frame shift",
            header.frame_shift as usize,
            config.frame_shift,
        ),
    ];
    for (what, got, want) in expected {
        if got != want {
            return Err(Failure::Validation(format!(
                "feature file {what} is {got}, vocoder expects {want}"
            )));
        }
    }
    Ok(())
}

fn cmd_synth(
    config: &VocoderConfig,
    features: &Path,
    out: &Path,
    seed: u64,
) -> Result<(), Failure> {
    let (header, track) = read_features(features).map_err(|e| io_failure(features, e))?;
    check_header(&header, config)?;
    let violations = validate_track(&track, config);
    if !violations.is_empty() {
        return Err(Error::Validation(violations).into());
    }
    let audio = synthesize(&track, config, seed)?;
    write_wav(out, &audio).map_err(|e| io_failure(out, e))?;
    println!("frames={}", track.len());
    println!("samples={}", audio.len());
    Ok(())
}

fn read_f0(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| io_failure(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

fn cmd_analyze(
    config: &VocoderConfig,
    audio_path: &Path,
    f0_path: &Path,
    out: &Path,
    history_path: &Path,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<(), Failure> {
    let audio = read_wav(audio_path).map_err(|e| io_failure(audio_path, e))?;
    if audio.sample_rate_hz != config.sample_rate_hz {
        return Err(io_failure(
            audio_path,
            format!(
                "sample rate is {} Hz, the vocoder runs at {} Hz",
                audio.sample_rate_hz, config.sample_rate_hz
            ),
        ));
    }
    let f0 = read_f0(f0_path)?;
    let frames = config.frames_for_samples(audio.len());
    if f0.len() != frames {
        return Err(Failure::Validation(format!(
            "F0 track has {} frames, {} samples of audio need {frames}",
            f0.len(),
            audio.len()
        )));
    }
    let estimate = estimate_features_with(&audio, &f0, config, opt, seed, |_, _| {})?;
    write_features(out, &estimate.track, config).map_err(|e| io_failure(out, e))?;
    let mut text = String::new();
    for (i, loss) in estimate.history.iter().enumerate() {
        let _ = writeln!(text, "{i} {loss}");
    }
    std::fs::write(history_path, text).map_err(|e| io_failure(history_path, e))?;
    println!("initial_loss={}", estimate.history[0]);
    println!("best_loss={}", estimate.best_loss());
    println!("best_iteration={}", estimate.best_iteration);
    Ok(())
}

fn cmd_gradcheck(
    config: &VocoderConfig,
    frames: usize,
    trials: usize,
    seed: u64,
) -> Result<(), Failure> {
    if frames == 0 || trials == 0 {
        return Err(Failure::Io(
            "--frames and --trials must be at least 1".into(),
        ));
    }
    let (track, target) = random_problem(frames, config, seed)?;
    let report = finite_diff_check(&track, &target, config, seed, GRADCHECK_EPS, trials)?;
    for p in &report.probes {
        println!(
            "probe frame={} coordinate={:?} analytic={:e} numeric={:e} relative_error={:e}",
            p.frame, p.coordinate, p.analytic, p.numeric, p.relative_error
        );
    }
    println!("max_relative_error={:e}", report.max_relative_error);
    if report.max_relative_error < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "max relative error {:e} is not below {GRADCHECK_TOLERANCE:e}",
            report.max_relative_error
        )))
    }
}

fn cmd_bench(
    config: &VocoderConfig,
    seconds: f64,
    repeats: usize,
    seed: u64,
) -> Result<(), Failure> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(Failure::Io(format!(
            "--seconds must be positive, got {seconds}"
        )));
    }
    let frames = (seconds * config.frames_per_second()).ceil() as usize;
    let track = smooth_random_track(frames, config, seed);
    let stats = bench_rtf(&track, config, seed, repeats)?;
    print!("{}", count_flops(config));
    println!("audio_seconds={}", stats.audio_seconds);
    println!("repeats={}", stats.samples.len());
    println!("rtf_median={:e}", stats.median);
    println!("rtf_p95={:e}", stats.p95);
    Ok(())
}
