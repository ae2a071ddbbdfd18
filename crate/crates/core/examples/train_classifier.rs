//! Train the switcher-aware classifier on simulated sequences, save it,
//! reload it, and compare it against the position-only baseline.
//!
//! Run: `cargo run --release --example train_classifier`

use sactrack::metrics::{evaluate, DEFAULT_IOU_THRESHOLD};
use sactrack::pipeline::TrackerConfig;
use sactrack::sac::{
    parse_model, to_dataset, train_with_report, PairClassifier, ShortTermAffinity, TrainConfig, TrainingSetConfig,
};
use sactrack::sim::{generate_scenario, ScenarioConfig};
use sactrack::workflow::{track_scenario, training_samples, Oracles};

fn main() {
    let tracker_cfg = TrackerConfig::default();
    let set_cfg = TrainingSetConfig::default();
    let scenario = |seed| {
        generate_scenario(&ScenarioConfig {
            crossings: 3,
            seed,
            ..ScenarioConfig::default()
        })
        .expect("valid scenario")
    };

    let mut samples = Vec::new();
    for seed in 100..103 {
        let s = scenario(seed);
        samples.extend(
            training_samples(
                &s.detections,
                &s.gt,
                Oracles::from_scenario(&s),
                &ShortTermAffinity,
                &tracker_cfg,
                &set_cfg,
            )
            .expect("samples"),
        );
    }
    let data = to_dataset(&samples);
    let positives = data.labels.iter().filter(|l| **l).count();
    println!(
        "{} samples ({positives} positive), {} features",
        data.rows.len(),
        data.n_features()
    );

    let train_cfg = TrainConfig {
        n_trees: 100,
        ..TrainConfig::default()
    };
    let (model, report) = train_with_report(&data, &train_cfg).expect("training");
    for (round, loss) in report.losses.iter().enumerate().step_by(20) {
        println!("  round {round:>3}: logistic loss {loss:.4}");
    }

    let text = sactrack::sac::write_model(&model);
    let reloaded = parse_model(&text).expect("round trip");
    assert_eq!(reloaded, model);
    println!("model file: {} lines, reload is exact", text.lines().count());

    let test = scenario(7);
    for (name, clf) in [
        ("baseline", &ShortTermAffinity as &dyn PairClassifier),
        ("trained", &reloaded),
    ] {
        let run = track_scenario(&test, clf, &tracker_cfg).expect("tracking");
        let r = evaluate(&test.gt, &run.output, DEFAULT_IOU_THRESHOLD).expect("metrics");
        println!("{name:<9} MOTA {:.4}  IDF1 {:.4}  IDS {}", r.mota, r.idf1, r.ids);
    }
}
