//! End-to-end checks of the training workflow and the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

use sactrack::pipeline::TrackerConfig;
use sactrack::sac::{PairClassifier, ShortTermAffinity, TrainConfig, TrainingSetConfig};
use sactrack::sim::{generate_scenario, Scenario, ScenarioConfig};
use sactrack::workflow::{train_on_scenarios, training_samples, Oracles};

fn scenario(seed: u64) -> Scenario {
    generate_scenario(&ScenarioConfig {
        n_targets: 8,
        crossings: 4,
        n_frames: 150,
        fn_rate: 0.1,
        jitter: 2.0,
        seed,
        ..ScenarioConfig::default()
    })
    .expect("valid scenario")
}

#[test]
fn trained_model_prefers_original_over_swapped_positives() {
    let tracker_cfg = TrackerConfig::default();
    let set_cfg = TrainingSetConfig::default();
    let train: Vec<Scenario> = (1000..1004).map(scenario).collect();
    let model = train_on_scenarios(&train, &tracker_cfg, &set_cfg, &TrainConfig::default()).unwrap();

    let (mut better, mut total) = (0, 0);
    for seed in 2000..2003 {
        let s = scenario(seed);
        let samples = training_samples(
            &s.detections,
            &s.gt,
            Oracles::from_scenario(&s),
            &ShortTermAffinity,
            &tracker_cfg,
            &set_cfg,
        )
        .unwrap();
        for sample in samples.iter().filter(|s| s.label) {
            let swapped = sample.features.swapped();
            assert_eq!(swapped.values().len(), sample.features.values().len());
            let original = model.score(&sample.features).unwrap();
            let exchanged = model.score(&swapped).unwrap();
            total += 1;
            if original > exchanged {
                better += 1;
            }
        }
    }
    let rate = better as f64 / total as f64;
    println!("original above swapped on {better}/{total} held-out positives ({rate:.3})");
    assert!(total > 100, "too few held-out positives: {total}");
    assert!(
        rate >= 0.9,
        "original scored above swapped on {better}/{total} = {rate:.3}"
    );
}

fn sactrack(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sactrack"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.cfg"), "scenario.targets = 4\nscenario.frames = 50\n").unwrap();

    let ok = |args: &[&str]| {
        let out = sactrack(d, args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    };
    ok(&["simulate", "--config", "run.cfg", "--output-dir", "seq"]);
    for f in ["scenario.cfg", "gt.txt", "det.txt"] {
        assert!(d.join("seq").join(f).exists(), "{f} missing");
    }
    ok(&[
        "track",
        "--detections",
        "seq/det.txt",
        "--scenario",
        "seq/scenario.cfg",
        "--nms",
        "--output",
        "t.txt",
    ]);
    ok(&[
        "postprocess",
        "--tracks",
        "t.txt",
        "--scenario",
        "seq/scenario.cfg",
        "--output",
        "p.txt",
    ]);
    let kv = ok(&["eval", "--tracks", "p.txt", "--gt", "seq/gt.txt", "--format", "kv"]);
    let mota: f64 = kv
        .lines()
        .find_map(|l| l.strip_prefix("mota="))
        .expect("mota line")
        .parse()
        .unwrap();
    assert!(mota > 0.8, "{kv}");
    ok(&[
        "render",
        "--tracks",
        "p.txt",
        "--gt",
        "seq/gt.txt",
        "--output-dir",
        "frames",
    ]);
    assert!(d.join("frames/frame_000001.svg").exists());
    // tracking without a scenario falls back to position-only cues
    ok(&["track", "--detections", "seq/det.txt", "--output", "plain.txt"]);

    assert_eq!(sactrack(d, &["--help"]).status.code(), Some(0));
    assert_eq!(sactrack(d, &["--version"]).status.code(), Some(0));
    assert_eq!(sactrack(d, &[]).status.code(), Some(1));
    assert_eq!(sactrack(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(sactrack(d, &["eval", "--tracks", "p.txt"]).status.code(), Some(1));
    assert_eq!(
        sactrack(d, &["eval", "--tracks", "p.txt", "--gt", "seq/gt.txt", "--iou", "abc"])
            .status
            .code(),
        Some(1)
    );

    // data errors
    assert_eq!(
        sactrack(d, &["eval", "--tracks", "missing.txt", "--gt", "seq/gt.txt"])
            .status
            .code(),
        Some(2)
    );
    std::fs::write(d.join("bad.txt"), "1,1,0,0,10,10\n").unwrap();
    let out = sactrack(d, &["eval", "--tracks", "bad.txt", "--gt", "seq/gt.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    std::fs::write(d.join("bad.cfg"), "quality.decay = fast\n").unwrap();
    assert_eq!(
        sactrack(
            d,
            &[
                "track",
                "--detections",
                "seq/det.txt",
                "--config",
                "bad.cfg",
                "--output",
                "x.txt"
            ]
        )
        .status
        .code(),
        Some(2)
    );
    std::fs::write(d.join("unknown.cfg"), "no.such.key = 1\n").unwrap();
    assert_eq!(
        sactrack(d, &["simulate", "--config", "unknown.cfg", "--output-dir", "s2"])
            .status
            .code(),
        Some(2)
    );
    // detections where tracks are expected
    assert_eq!(
        sactrack(d, &["eval", "--tracks", "seq/det.txt", "--gt", "seq/gt.txt"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(sactrack(d, &["train-sac", "--output", "m.txt"]).status.code(), Some(2));
    assert!(!d.join("x.txt").exists() && !d.join("m.txt").exists());
}

#[test]
fn tracking_is_stable_under_detection_order() {
    let s = scenario(42);
    let cfg = TrackerConfig::default();
    let a = sactrack::workflow::track_scenario(&s, &ShortTermAffinity, &cfg).unwrap();
    let mut reversed = s.clone();
    for dets in reversed.detections.values_mut() {
        dets.reverse();
    }
    let b = sactrack::workflow::track_scenario(&reversed, &ShortTermAffinity, &cfg).unwrap();
    // identities may be numbered differently; the emitted boxes may not differ
    let boxes = |r: &sactrack::pipeline::TrackingRun| {
        let mut v: Vec<String> = r
            .output
            .iter()
            .flat_map(|t| t.positions.iter().map(|(f, b)| format!("{f} {b:?}")))
            .collect();
        v.sort();
        v
    };
    assert_eq!(boxes(&a), boxes(&b));
}
