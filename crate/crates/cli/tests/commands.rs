use std::path::Path;
use std::process::{Command, Output};

use ddsp_vocoder::io::{read_features, read_wav, write_features, write_wav};
use ddsp_vocoder::{
    mw_stft_loss, smooth_random_track, synthesize, AudioBuffer, FeatureFrame, FeatureTrack,
    VocoderConfig,
};

fn ddspvoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddspvoc"))
        .args(args)
        .output()
        .expect("run ddspvoc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(|l| {
            let (k, v) = l
                .split_once('=')
                .unwrap_or_else(|| panic!("not key=value: {l}"));
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn value(text: &str, key: &str) -> f64 {
    key_values(text)
        .into_iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("missing {key}"))
        .1
        .parse()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_writes_one_hop_per_frame_deterministically() {
    let c = VocoderConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let feats = dir.path().join("a.feat");
    write_features(&feats, &smooth_random_track(100, &c, 4), &c).unwrap();

    let a = dir.path().join("a.wav");
    let b = dir.path().join("b.wav");
    for out in [&a, &b] {
        let o = ddspvoc(&[
            "synth",
            "--features",
            s(&feats),
            "--out",
            s(out),
            "--seed",
            "9",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(read_wav(&a).unwrap().len(), 12_800);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn synth_rejects_corrupt_and_invalid_files() {
    let c = VocoderConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.wav");

    let corrupt = dir.path().join("bad.feat");
    write_features(&corrupt, &smooth_random_track(3, &c, 0), &c).unwrap();
    let mut bytes = std::fs::read(&corrupt).unwrap();
    bytes[0] = b'X';
    std::fs::write(&corrupt, bytes).unwrap();
    let o = ddspvoc(&["synth", "--features", s(&corrupt), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let invalid = dir.path().join("invalid.feat");
    let mut track = smooth_random_track(10, &c, 0);
    track.frames[7].p[2] = 1.5;
    write_features(&invalid, &track, &c).unwrap();
    let o = ddspvoc(&["synth", "--features", s(&invalid), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("frame 7"));

    let missing = dir.path().join("missing.feat");
    let o = ddspvoc(&["synth", "--features", s(&missing), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_f0(path: &Path, f0: &[f64]) {
    let text: String = f0.iter().map(|f| format!("{f}\n")).collect();
    std::fs::write(path, text).unwrap();
}

#[test]
fn analyze_with_zero_iterations_returns_the_initialization() {
    let c = VocoderConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("t.wav");
    let track = smooth_random_track(20, &c, 1);
    write_wav(&wav, &synthesize(&track, &c, 0).unwrap()).unwrap();
    let f0 = dir.path().join("f0.txt");
    write_f0(&f0, &track.f0());
    let out = dir.path().join("r.feat");

    let o = ddspvoc(&[
        "analyze",
        "--audio",
        s(&wav),
        "--f0",
        s(&f0),
        "--out",
        s(&out),
        "--iters",
        "0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, recovered) = read_features(&out).unwrap();
    assert_eq!(recovered.len(), 20);
    for (frame, f0) in recovered.frames.iter().zip(track.f0()) {
        let init = FeatureFrame::flat(&c, (f0 as f32) as f64, 0.5, -2.0);
        assert_eq!(frame, &init);
    }
    let history = std::fs::read_to_string(dir.path().join("r.feat.loss.txt")).unwrap();
    assert_eq!(history.lines().count(), 1);
    assert!(history.starts_with("0 "));
}

#[test]
fn analyze_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.feat");

    let wrong_rate = dir.path().join("16k.wav");
    write_wav(&wrong_rate, &AudioBuffer::new(vec![0.0; 1600], 16_000)).unwrap();
    let f0 = dir.path().join("f0.txt");
    write_f0(&f0, &[100.0; 13]);
    let o = ddspvoc(&[
        "analyze",
        "--audio",
        s(&wrong_rate),
        "--f0",
        s(&f0),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("16000"));

    let wav = dir.path().join("t.wav");
    write_wav(&wav, &AudioBuffer::new(vec![0.0; 1280], 24_000)).unwrap();
    write_f0(&f0, &[100.0; 9]);
    let o = ddspvoc(&[
        "analyze",
        "--audio",
        s(&wav),
        "--f0",
        s(&f0),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));

    std::fs::write(&f0, "100\nabc\n").unwrap();
    let o = ddspvoc(&[
        "analyze",
        "--audio",
        s(&wav),
        "--f0",
        s(&f0),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_round_trip_reduces_loss_tenfold() {
    let c = VocoderConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let track: FeatureTrack = smooth_random_track(40, &c, 2);
    let original = synthesize(&track, &c, 5).unwrap();
    let wav = dir.path().join("t.wav");
    write_wav(&wav, &original).unwrap();
    let f0 = dir.path().join("f0.txt");
    write_f0(&f0, &track.f0());
    let feats = dir.path().join("r.feat");
    let o = ddspvoc(&[
        "analyze",
        "--audio",
        s(&wav),
        "--f0",
        s(&f0),
        "--out",
        s(&feats),
        "--seed",
        "5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let resynth = dir.path().join("r.wav");
    let o = ddspvoc(&[
        "synth",
        "--features",
        s(&feats),
        "--out",
        s(&resynth),
        "--seed",
        "5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let reference = read_wav(&wav).unwrap();
    let history = std::fs::read_to_string(dir.path().join("r.feat.loss.txt")).unwrap();
    assert_eq!(history.lines().count(), 2001);
    let initial: f64 = history
        .lines()
        .next()
        .unwrap()
        .split_whitespace()
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    let last = mw_stft_loss(&reference, &read_wav(&resynth).unwrap(), &c).unwrap();
    assert!(
        last <= 0.1 * initial,
        "initial {initial}, after round trip {last}"
    );
}

#[test]
fn gradcheck_defaults_pass_and_are_reproducible() {
    let a = ddspvoc(&["gradcheck"]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    let out = stdout(&a);
    assert_eq!(out.lines().filter(|l| l.starts_with("probe ")).count(), 64);
    let max = out.lines().last().unwrap();
    let err: f64 = max
        .strip_prefix("max_relative_error=")
        .unwrap()
        .parse()
        .unwrap();
    assert!(err < 1e-4);
    assert_eq!(stdout(&ddspvoc(&["gradcheck"])), out);

    let one = stdout(&ddspvoc(&["gradcheck", "--trials", "1", "--seed", "3"]));
    assert_eq!(one.lines().filter(|l| l.starts_with("probe ")).count(), 1);
}

#[test]
fn flops_and_bench_print_key_values() {
    let flops = stdout(&ddspvoc(&["flops"]));
    let total = value(&flops, "mflops_total");
    assert!((10.0..=20.0).contains(&total), "{total}");

    let o = ddspvoc(&["bench", "--seconds", "2", "--repeats", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(value(&text, "rtf_median") > 0.0);
    assert!(value(&text, "mflops_total") > 0.0);
    assert_eq!(value(&text, "repeats"), 3.0);
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(ddspvoc(&["synth"]).status.code(), Some(2));
    assert_eq!(
        ddspvoc(&["gradcheck", "--frames", "x"]).status.code(),
        Some(2)
    );
    assert_eq!(ddspvoc(&["nonsense"]).status.code(), Some(2));
}
