//! Cue ablation on crossing-heavy simulated sequences: trains one
//! classifier per feature mask and compares identity switches and IDF1.
//!
//! Run: `cargo run --release --example ablation`

use std::time::Instant;

use sactrack::io::config::mask_name;
use sactrack::metrics::{evaluate, DEFAULT_IOU_THRESHOLD};
use sactrack::pipeline::TrackerConfig;
use sactrack::sac::{FeatureMask, TrainConfig, TrainingSetConfig};
use sactrack::sim::{generate_scenario, Scenario, ScenarioConfig};
use sactrack::workflow::{track_scenario, train_on_scenarios};

fn scenario(seed: u64) -> Scenario {
    let cfg = ScenarioConfig {
        n_targets: 8,
        crossings: 4,
        n_frames: 150,
        fn_rate: 0.1,
        jitter: 2.0,
        appearance_noise: 0.3,
        seed,
        ..ScenarioConfig::default()
    };
    generate_scenario(&cfg).expect("valid scenario")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn main() {
    let start = Instant::now();
    let train_set: Vec<Scenario> = (1000..1006).map(scenario).collect();
    let eval_set: Vec<Scenario> = (0..20).map(scenario).collect();
    for mask in [FeatureMask::FULL, FeatureMask::NO_SWITCHER, FeatureMask::SHORT_ONLY] {
        let tracker_cfg = TrackerConfig {
            mask,
            ..TrackerConfig::default()
        };
        let set_cfg = TrainingSetConfig {
            mask,
            ..TrainingSetConfig::default()
        };
        let model = train_on_scenarios(&train_set, &tracker_cfg, &set_cfg, &TrainConfig::default()).expect("training");
        let mut ids = Vec::new();
        let mut idf1 = Vec::new();
        let mut mota = Vec::new();
        for s in &eval_set {
            let run = track_scenario(s, &model, &tracker_cfg).expect("tracking");
            let r = evaluate(&s.gt, &run.output, DEFAULT_IOU_THRESHOLD).expect("metrics");
            ids.push(r.ids as f64);
            idf1.push(r.idf1);
            mota.push(r.mota);
        }
        println!(
            "{:<12} median IDS {:>5.1}  median IDF1 {:.4}  median MOTA {:.4}   ids={:?}",
            mask_name(&mask).unwrap_or("custom"),
            median(ids.clone()),
            median(idf1),
            median(mota),
            ids
        );
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
}
