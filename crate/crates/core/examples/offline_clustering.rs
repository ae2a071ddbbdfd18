//! Offline refinement: split tracklets whose appearance changes, merge
//! fragments of one identity, and interpolate over gaps.
//!
//! Run: `cargo run --release --example offline_clustering`

use sactrack::entity::Tracklet;
use sactrack::geometry::BoundingBox;
use sactrack::metrics::{evaluate, DEFAULT_IOU_THRESHOLD};
use sactrack::pipeline::TrackerConfig;
use sactrack::postproc::{attach_embeddings, interpolate, postprocess, ClusterConfig};
use sactrack::sac::ShortTermAffinity;
use sactrack::sim::{generate_scenario, ScenarioConfig};
use sactrack::workflow::track_scenario;

fn main() {
    let bb = |x: f64| BoundingBox::new(x, 0.0, 10.0, 10.0).expect("valid box");
    let t = Tracklet::with_positions(1, [(1, bb(0.0)), (4, bb(30.0))]);
    let filled = interpolate(&t);
    println!("interpolating frames 1 and 4:");
    for (f, b) in &filled.positions {
        println!("  frame {f}: x = {:.1}", b.x);
    }

    let s = generate_scenario(&ScenarioConfig {
        n_targets: 8,
        crossings: 4,
        n_frames: 150,
        fn_rate: 0.2,
        seed: 5,
        ..ScenarioConfig::default()
    })
    .expect("valid scenario");
    let mut online = track_scenario(&s, &ShortTermAffinity, &TrackerConfig::default())
        .expect("tracking")
        .output;
    attach_embeddings(&mut online, &s);
    let (refined, converged) = postprocess(&online, &ClusterConfig::default());
    for (name, tracks) in [("online", &online), ("refined", &refined)] {
        let r = evaluate(&s.gt, tracks, DEFAULT_IOU_THRESHOLD).expect("metrics");
        println!(
            "{name:<8} {:>3} tracklets  MOTA {:.4}  IDF1 {:.4}  IDS {:>2}  FN {}",
            tracks.len(),
            r.mota,
            r.idf1,
            r.ids,
            r.fn_
        );
    }
    println!("fixed point reached: {converged}");
}
