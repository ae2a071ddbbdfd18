//! Drive the online tracker frame by frame and watch tracklets appear,
//! coast through missed detections, and get dropped.
//!
//! Run: `cargo run --example online_tracking`

use sactrack::metrics::{evaluate, DEFAULT_IOU_THRESHOLD};
use sactrack::pipeline::{Tracker, TrackerConfig};
use sactrack::sac::ShortTermAffinity;
use sactrack::short_cues::ReferenceTracker;
use sactrack::sim::{generate_scenario, ScenarioConfig};

fn main() {
    let s = generate_scenario(&ScenarioConfig {
        n_targets: 5,
        n_frames: 100,
        fn_rate: 0.15,
        seed: 11,
        ..ScenarioConfig::default()
    })
    .expect("valid scenario");

    let cfg = TrackerConfig::default();
    let mut tracker = Tracker::new(cfg, &ReferenceTracker, &s, &s, &ShortTermAffinity).expect("valid config");
    let no_dets = Vec::new();
    for f in s.frames() {
        let dets = s.detections.get(&f).unwrap_or(&no_dets);
        let out = tracker.track_step(f, dets).expect("monotonic frames");
        if f % 20 == 1 {
            let qualities: Vec<String> = tracker.active().map(|t| format!("{}:{:.2}", t.id, t.quality)).collect();
            println!(
                "frame {f:>3}: {} detections, {} boxes emitted, active [{}]",
                dets.len(),
                out.boxes.len(),
                qualities.join(" ")
            );
        }
    }
    let run = tracker.finish();
    let r = evaluate(&s.gt, &run.output, DEFAULT_IOU_THRESHOLD).expect("metrics");
    println!("{} tracklets emitted ({} raw)", run.output.len(), run.raw.len());
    println!("{r}");
}
